use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::MnlCoefficients;
use crate::real::Real;

/// A node of the class tree.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeRef {
    Root,
    Internal(String),
    /// Zero-based class index.
    Leaf(usize),
}

impl fmt::Display for NodeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeRef::Root => write!(f, "root"),
            NodeRef::Internal(name) => write!(f, "{name}"),
            NodeRef::Leaf(j) => write!(f, "class {}", j + 1),
        }
    }
}

/// An edge of the class tree. Each branch owns one parameter vector of
/// length `p + 1` (intercept slot then one slot per covariate).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Branch {
    pub parent: NodeRef,
    pub child: NodeRef,
}

/// Rooted tree whose leaves are the `J` classes.
///
/// A class's MNL coefficients are the sum of the parameters of every branch
/// on its root-to-leaf path, so classes that share ancestors share prior
/// mass. A flat tree (every leaf hangs off the root) gives one private
/// branch per class and reduces to the plain MNL.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassHierarchy {
    n_classes: usize,
    branches: Vec<Branch>,
    /// Per class, branch indices from the root down to the leaf.
    paths: Vec<Vec<usize>>,
    /// Per class, index into `parent_names`.
    parent_of: Vec<usize>,
    parent_names: Vec<String>,
}

impl ClassHierarchy {
    /// Every class directly under the root; branch `j` belongs to class `j`.
    pub fn flat(n_classes: usize) -> Self {
        Self::from_leaf_paths(n_classes, &vec![Vec::new(); n_classes])
            .expect("a flat tree is always well formed")
    }

    /// Builds the tree from, for each class `j`, the internal nodes on its
    /// path below the root (outermost first).
    ///
    /// Branches are numbered in order of first appearance when walking the
    /// classes in index order.
    pub fn from_leaf_paths(n_classes: usize, leaf_paths: &[Vec<String>]) -> Result<Self> {
        if leaf_paths.len() != n_classes {
            return Err(Error::Hierarchy(format!(
                "{} leaves listed, expected {n_classes}",
                leaf_paths.len()
            )));
        }
        if n_classes == 0 {
            return Err(Error::Hierarchy("tree has no leaves".into()));
        }
        let mut parent_of_node: HashMap<String, NodeRef> = HashMap::new();
        let mut branch_index: HashMap<(NodeRef, NodeRef), usize> = HashMap::new();
        let mut branches = Vec::new();
        let mut paths = Vec::with_capacity(n_classes);
        let mut parent_names: Vec<String> = Vec::new();
        let mut parent_of = Vec::with_capacity(n_classes);

        for (j, internal) in leaf_paths.iter().enumerate() {
            let mut path = Vec::with_capacity(internal.len() + 1);
            let mut parent = NodeRef::Root;
            for name in internal {
                if name.is_empty() {
                    return Err(Error::Hierarchy(format!(
                        "class {} has an empty node name in its path",
                        j + 1
                    )));
                }
                match parent_of_node.get(name) {
                    Some(existing) if *existing != parent => {
                        return Err(Error::Hierarchy(format!(
                            "node {name} appears under both {existing} and {parent}"
                        )));
                    }
                    Some(_) => {}
                    None => {
                        if path_contains(&parent_of_node, &parent, name) {
                            return Err(Error::Hierarchy(format!("cycle through node {name}")));
                        }
                        parent_of_node.insert(name.clone(), parent.clone());
                    }
                }
                let child = NodeRef::Internal(name.clone());
                path.push(intern_branch(
                    &mut branches,
                    &mut branch_index,
                    parent,
                    child.clone(),
                ));
                parent = child;
            }
            let group = match &parent {
                NodeRef::Internal(name) => name.clone(),
                _ => "root".to_string(),
            };
            let group_index = match parent_names.iter().position(|g| *g == group) {
                Some(k) => k,
                None => {
                    parent_names.push(group);
                    parent_names.len() - 1
                }
            };
            parent_of.push(group_index);
            path.push(intern_branch(
                &mut branches,
                &mut branch_index,
                parent,
                NodeRef::Leaf(j),
            ));
            paths.push(path);
        }
        Ok(Self {
            n_classes,
            branches,
            paths,
            parent_of,
            parent_names,
        })
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn n_branches(&self) -> usize {
        self.branches.len()
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    /// Branch indices on class `j`'s root-to-leaf path.
    pub fn path(&self, j: usize) -> &[usize] {
        &self.paths[j]
    }

    /// Parent group of class `j` (the internal node directly above it, or
    /// `root` for a leaf attached to the root).
    pub fn parent_of(&self, j: usize) -> usize {
        self.parent_of[j]
    }

    pub fn parent_names(&self) -> &[String] {
        &self.parent_names
    }

    pub fn is_flat(&self) -> bool {
        self.paths.iter().all(|p| p.len() == 1)
    }
}

fn intern_branch(
    branches: &mut Vec<Branch>,
    index: &mut HashMap<(NodeRef, NodeRef), usize>,
    parent: NodeRef,
    child: NodeRef,
) -> usize {
    *index
        .entry((parent.clone(), child.clone()))
        .or_insert_with(|| {
            branches.push(Branch { parent, child });
            branches.len() - 1
        })
}

/// Whether `name` is already an ancestor of (or equal to) `node`.
fn path_contains(parents: &HashMap<String, NodeRef>, node: &NodeRef, name: &str) -> bool {
    let mut cur = node.clone();
    loop {
        match cur {
            NodeRef::Internal(n) => {
                if n == name {
                    return true;
                }
                cur = parents.get(&n).cloned().unwrap_or(NodeRef::Root);
            }
            _ => return false,
        }
    }
}

/// Sums branch parameters along each class's path.
///
/// `phi` has one row per branch: column 0 is the intercept slot and columns
/// `1..=p` the covariate slots.
pub fn compose_hierarchy_coefficients<F: Real>(
    hierarchy: &ClassHierarchy,
    phi: &Matrix<F>,
) -> Result<MnlCoefficients<F>> {
    if phi.rows() != hierarchy.n_branches() || phi.cols() == 0 {
        return Err(Error::Shape(format!(
            "branch parameters are {}x{}, tree has {} branches",
            phi.rows(),
            phi.cols(),
            hierarchy.n_branches()
        )));
    }
    let mut coef = MnlCoefficients::zeros(phi.cols() - 1, hierarchy.n_classes());
    coef.compose_from(hierarchy, phi);
    Ok(coef)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn figure_tree() -> ClassHierarchy {
        let a = vec!["left".to_string()];
        let b = vec!["right".to_string()];
        ClassHierarchy::from_leaf_paths(4, &[a.clone(), a, b.clone(), b]).unwrap()
    }

    #[test]
    fn figure_tree_has_six_branches() {
        let h = figure_tree();
        assert_eq!(h.n_branches(), 6);
        assert_eq!(h.path(0), &[0, 1]);
        assert_eq!(h.path(1), &[0, 2]);
        assert_eq!(h.path(2), &[3, 4]);
        assert_eq!(h.path(3), &[3, 5]);
        assert_eq!(h.parent_of(0), h.parent_of(1));
        assert_ne!(h.parent_of(1), h.parent_of(2));
    }

    #[test]
    fn figure_composition() {
        // p = 1: column 1 carries the scalar coefficient.
        let h = figure_tree();
        let mut phi = Matrix::from_elem(6, 2, 0.0_f64);
        phi.set(0, 1, 1.0); // root -> left
        phi.set(1, 1, 2.0); // left -> class 1
        phi.set(2, 1, 3.0); // left -> class 2
        let c = compose_hierarchy_coefficients(&h, &phi).unwrap();
        assert_eq!(c.beta.get(0, 0), 3.0);
        assert_eq!(c.beta.get(0, 1), 4.0);
        assert_eq!(c.beta.get(0, 2), 0.0);
        assert_eq!(c.beta.get(0, 3), 0.0);
        assert!(c.alpha.iter().all(|&a| a == 0.0));
    }

    #[test]
    fn zero_branches_compose_to_zero() {
        let h = figure_tree();
        let phi = Matrix::from_elem(6, 4, 0.0_f32);
        let c = compose_hierarchy_coefficients(&h, &phi).unwrap();
        assert!(c.alpha.iter().all(|&a| a == 0.0));
        assert!(c.beta.as_slice().iter().all(|&b| b == 0.0));
    }

    #[test]
    fn siblings_differ_only_by_terminal_branch() {
        let h = figure_tree();
        let phi = Matrix::from_vec(6, 3, (0..18).map(|v| v as f64 * 0.37 - 2.0).collect()).unwrap();
        let c = compose_hierarchy_coefficients(&h, &phi).unwrap();
        for l in 0..2 {
            let diff = c.beta.get(l, 0) - c.beta.get(l, 1);
            assert!((diff - (phi.get(1, l + 1) - phi.get(2, l + 1))).abs() < 1e-12);
        }
        let da = c.alpha[0] - c.alpha[1];
        assert!((da - (phi.get(1, 0) - phi.get(2, 0))).abs() < 1e-12);
    }

    #[test]
    fn flat_tree_is_identity() {
        let h = ClassHierarchy::flat(3);
        assert!(h.is_flat());
        let phi = Matrix::from_vec(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let c = compose_hierarchy_coefficients(&h, &phi).unwrap();
        assert_eq!(c.alpha, vec![1.0, 3.0, 5.0]);
        assert_eq!(c.beta.row(0), &[2.0, 4.0, 6.0]);
    }

    #[test]
    fn rejects_conflicting_parents_and_cycles() {
        let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
        assert!(ClassHierarchy::from_leaf_paths(2, &[s(&["a", "b"]), s(&["b"])]).is_err());
        assert!(ClassHierarchy::from_leaf_paths(1, &[s(&["a", "a"])]).is_err());
        assert!(ClassHierarchy::from_leaf_paths(2, &[s(&["a"])]).is_err());
        assert!(ClassHierarchy::from_leaf_paths(1, &[s(&["a", ""])]).is_err());
    }

    #[test]
    fn wrong_phi_shape_rejected() {
        let h = ClassHierarchy::flat(3);
        let phi = Matrix::from_elem(2, 2, 0.0_f64);
        assert!(compose_hierarchy_coefficients(&h, &phi).is_err());
    }
}
