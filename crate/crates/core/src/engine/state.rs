use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ComponentParams;
use crate::real::Real;

const DETACHED: usize = usize::MAX;

/// Assignment of cases to occupied components.
///
/// Component ids are positions in `components` and carry no meaning across
/// samples; deleting an emptied component moves the last one into its slot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
pub struct MixtureState<F> {
    assign: Vec<usize>,
    components: Vec<ComponentParams<F>>,
    counts: Vec<usize>,
}

impl<F: Real> MixtureState<F> {
    /// No cases and no components.
    pub fn empty() -> Self {
        Self {
            assign: Vec::new(),
            components: Vec::new(),
            counts: Vec::new(),
        }
    }

    /// All `n` cases in one component.
    pub fn single(n: usize, theta: ComponentParams<F>) -> Self {
        Self {
            assign: vec![0; n],
            components: vec![theta],
            counts: vec![n],
        }
    }

    /// Builds a state from explicit assignments; ids must be `0..K` with
    /// every component occupied.
    pub fn from_assignments(assign: Vec<usize>, components: Vec<ComponentParams<F>>) -> Result<Self> {
        let mut counts = vec![0; components.len()];
        for &c in &assign {
            if c >= components.len() {
                return Err(Error::InvalidParameter(format!("assignment to missing component {c}")));
            }
            counts[c] += 1;
        }
        let s = Self {
            assign,
            components,
            counts,
        };
        s.check_invariants()?;
        Ok(s)
    }

    pub fn n(&self) -> usize {
        self.assign.len()
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assign
    }

    pub fn components(&self) -> &[ComponentParams<F>] {
        &self.components
    }

    pub fn component_mut(&mut self, c: usize) -> &mut ComponentParams<F> {
        &mut self.components[c]
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// Case indices of every component.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = self.counts.iter().map(|&c| Vec::with_capacity(c)).collect();
        for (i, &c) in self.assign.iter().enumerate() {
            out[c].push(i);
        }
        out
    }

    /// Takes case `i` out of its component. When that empties the component
    /// it is deleted and its parameters returned.
    pub(crate) fn detach(&mut self, i: usize) -> Option<ComponentParams<F>> {
        let c = self.assign[i];
        self.assign[i] = DETACHED;
        self.counts[c] -= 1;
        if self.counts[c] > 0 {
            return None;
        }
        let last = self.components.len() - 1;
        let theta = self.components.swap_remove(c);
        self.counts.swap_remove(c);
        if c != last {
            for a in self.assign.iter_mut() {
                if *a == last {
                    *a = c;
                }
            }
        }
        Some(theta)
    }

    pub(crate) fn attach(&mut self, i: usize, c: usize) {
        debug_assert_eq!(self.assign[i], DETACHED);
        self.assign[i] = c;
        self.counts[c] += 1;
    }

    pub(crate) fn attach_new(&mut self, i: usize, theta: ComponentParams<F>) {
        self.components.push(theta);
        self.counts.push(0);
        self.attach(i, self.components.len() - 1);
    }

    /// Every retained component is occupied and the counts match the
    /// assignments.
    pub fn check_invariants(&self) -> Result<()> {
        if self.components.len() != self.counts.len() {
            return Err(Error::InvalidParameter("components and counts disagree".into()));
        }
        let mut counts = vec![0; self.components.len()];
        for (i, &c) in self.assign.iter().enumerate() {
            if c >= counts.len() {
                return Err(Error::InvalidParameter(format!("case {i} is not assigned")));
            }
            counts[c] += 1;
        }
        if counts != self.counts {
            return Err(Error::InvalidParameter("stored counts are stale".into()));
        }
        if let Some(c) = counts.iter().position(|&k| k == 0) {
            return Err(Error::InvalidParameter(format!("component {c} is empty")));
        }
        Ok(())
    }
}
