use std::ops::Range;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::ClassHierarchy;
use crate::real::Real;

/// Covariates plus class labels for `n` cases.
///
/// Labels are stored zero-based (`0..n_classes`); the file formats use
/// `1..=J` and convert at the boundary.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<F> {
    x: Matrix<F>,
    labels: Vec<usize>,
    n_classes: usize,
    sources: Vec<Range<usize>>,
    hierarchy: Option<ClassHierarchy>,
}

impl<F: Real> Dataset<F> {
    pub fn new(x: Matrix<F>, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        if x.rows() != labels.len() {
            return Err(Error::Shape(format!(
                "{} covariate rows but {} labels",
                x.rows(),
                labels.len()
            )));
        }
        if n_classes == 0 {
            return Err(Error::InvalidParameter("need at least one class".into()));
        }
        if let Some((i, &y)) = labels.iter().enumerate().find(|(_, &y)| y >= n_classes) {
            return Err(Error::InvalidParameter(format!(
                "case {i} has label {} outside 1..={n_classes}",
                y + 1
            )));
        }
        let p = x.cols();
        Ok(Self {
            x,
            labels,
            n_classes,
            sources: vec![0..p],
            hierarchy: None,
        })
    }

    /// A dataset with no cases; the engine then samples from the prior.
    pub fn empty(p: usize, n_classes: usize) -> Result<Self> {
        Self::new(Matrix::from_elem(0, p, F::zero()), Vec::new(), n_classes)
    }

    /// Declares disjoint column blocks that together cover every covariate.
    pub fn with_sources(mut self, sources: Vec<Range<usize>>) -> Result<Self> {
        let mut sorted = sources.clone();
        sorted.sort_by_key(|r| r.start);
        let mut next = 0;
        for r in &sorted {
            if r.start != next || r.end <= r.start {
                return Err(Error::InvalidParameter(format!(
                    "source blocks must be non-empty, disjoint and cover 1..={}",
                    self.p()
                )));
            }
            next = r.end;
        }
        if next != self.p() {
            return Err(Error::InvalidParameter(format!(
                "source blocks cover {next} of {} covariates",
                self.p()
            )));
        }
        self.sources = sources;
        Ok(self)
    }

    pub fn with_hierarchy(mut self, hierarchy: ClassHierarchy) -> Result<Self> {
        if hierarchy.n_classes() != self.n_classes {
            return Err(Error::Hierarchy(format!(
                "hierarchy has {} leaves, dataset has {} classes",
                hierarchy.n_classes(),
                self.n_classes
            )));
        }
        self.hierarchy = Some(hierarchy);
        Ok(self)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.labels.len()
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.x.cols()
    }

    #[inline]
    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[F] {
        self.x.row(i)
    }

    #[inline]
    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn x(&self) -> &Matrix<F> {
        &self.x
    }

    pub fn x_mut(&mut self) -> &mut Matrix<F> {
        &mut self.x
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub(crate) fn labels_mut(&mut self) -> &mut [usize] {
        &mut self.labels
    }

    pub fn sources(&self) -> &[Range<usize>] {
        &self.sources
    }

    pub fn hierarchy(&self) -> Option<&ClassHierarchy> {
        self.hierarchy.as_ref()
    }

    /// Index of the source block containing covariate `l`.
    pub fn source_of(&self, l: usize) -> usize {
        self.sources
            .iter()
            .position(|r| r.contains(&l))
            .expect("sources cover every covariate")
    }

    /// Cases at `indices`, keeping sources and hierarchy.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            x: self.x.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            n_classes: self.n_classes,
            sources: self.sources.clone(),
            hierarchy: self.hierarchy.clone(),
        }
    }

    /// Replaces the covariate matrix, keeping labels. Resets sources to a
    /// single block when the column count changes.
    pub fn with_covariates(&self, x: Matrix<F>) -> Result<Self> {
        let mut out = Self::new(x, self.labels.clone(), self.n_classes)?;
        if out.p() == self.p() {
            out.sources = self.sources.clone();
        }
        out.hierarchy = self.hierarchy.clone();
        Ok(out)
    }
}
