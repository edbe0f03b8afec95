use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::Dataset;
use crate::real::Real;

/// Subtracts the training column means from both sets.
pub fn center_covariates<F: Real>(train: &Dataset<F>, test: &Dataset<F>) -> Result<(Dataset<F>, Dataset<F>, Vec<F>)> {
    if train.n() == 0 {
        return Err(Error::InvalidParameter("cannot centre on an empty training set".into()));
    }
    if train.p() != test.p() {
        return Err(Error::Shape(format!(
            "train has {} covariates, test {}",
            train.p(),
            test.p()
        )));
    }
    let n = F::from_usize(train.n()).unwrap();
    let means: Vec<F> = (0..train.p())
        .map(|l| (0..train.n()).map(|i| train.row(i)[l]).sum::<F>() / n)
        .collect();
    let shift = |d: &Dataset<F>| {
        let mut out = d.clone();
        for i in 0..d.n() {
            for (v, &m) in out.x_mut().row_mut(i).iter_mut().zip(&means) {
                *v = *v - m;
            }
        }
        out
    };
    Ok((shift(train), shift(test), means))
}

/// Column pairs `(l, k)` with `l <= k` in the order the products are
/// appended: `(0,0), (0,1), ..., (0,p-1), (1,1), ...`.
pub fn quadratic_pairs(p: usize) -> Vec<(usize, usize)> {
    (0..p).flat_map(|l| (l..p).map(move |k| (l, k))).collect()
}

/// Appends every product `x_l * x_k` with `l <= k` after the original
/// columns. The result has a single source block.
pub fn expand_quadratic<F: Real>(data: &Dataset<F>) -> Result<Dataset<F>> {
    let p = data.p();
    if p == 0 {
        return Err(Error::InvalidParameter("no covariates to expand".into()));
    }
    let pairs = quadratic_pairs(p);
    let width = p + pairs.len();
    let mut values = Vec::with_capacity(data.n() * width);
    for i in 0..data.n() {
        let row = data.row(i);
        values.extend_from_slice(row);
        values.extend(pairs.iter().map(|&(l, k)| row[l] * row[k]));
    }
    let out = data.with_covariates(Matrix::from_vec(data.n(), width, values)?)?;
    out.with_sources(vec![0..width])
}

/// Concatenates datasets column-wise; dataset `s` becomes source block `s`.
pub fn assemble_sources<F: Real>(parts: &[Dataset<F>]) -> Result<Dataset<F>> {
    let first = parts
        .first()
        .ok_or_else(|| Error::InvalidParameter("no sources to assemble".into()))?;
    for (s, d) in parts.iter().enumerate().skip(1) {
        if d.n() != first.n() {
            return Err(Error::Shape(format!(
                "source {} has {} cases, source 1 has {}",
                s + 1,
                d.n(),
                first.n()
            )));
        }
        if let Some(i) = (0..d.n()).find(|&i| d.label(i) != first.label(i)) {
            return Err(Error::InvalidParameter(format!(
                "source {} disagrees with source 1 on the label of case {}",
                s + 1,
                i + 1
            )));
        }
    }
    let width: usize = parts.iter().map(|d| d.p()).sum();
    let mut values = Vec::with_capacity(first.n() * width);
    for i in 0..first.n() {
        for d in parts {
            values.extend_from_slice(d.row(i));
        }
    }
    let mut ranges = Vec::with_capacity(parts.len());
    let mut start = 0;
    for d in parts {
        ranges.push(start..start + d.p());
        start += d.p();
    }
    let n_classes = parts.iter().map(|d| d.n_classes()).max().unwrap_or(1);
    let mut out = Dataset::new(Matrix::from_vec(first.n(), width, values)?, first.labels().to_vec(), n_classes)?
        .with_sources(ranges)?;
    if let Some(h) = first.hierarchy() {
        out = out.with_hierarchy(h.clone())?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds(rows: &[Vec<f64>], labels: Vec<usize>) -> Dataset<f64> {
        Dataset::new(Matrix::from_rows(rows).unwrap(), labels, 3).unwrap()
    }

    #[test]
    fn quadratic_example() {
        let d = ds(&[vec![2.0, 3.0], vec![0.0, 0.0]], vec![0, 1]);
        let q = expand_quadratic(&d).unwrap();
        assert_eq!(q.row(0), &[2.0, 3.0, 4.0, 6.0, 9.0]);
        assert!(q.row(1).iter().all(|&v| v == 0.0));
        let five = ds(&[vec![1.0; 5]], vec![0]);
        assert_eq!(expand_quadratic(&five).unwrap().p(), 20);
    }

    #[test]
    fn centring() {
        let tr = ds(&[vec![1.0, 5.0], vec![3.0, 5.0]], vec![0, 1]);
        let te = ds(&[vec![2.0, 0.0]], vec![2]);
        let (a, b, m) = center_covariates(&tr, &te).unwrap();
        assert_eq!(m, vec![2.0, 5.0]);
        assert_eq!(a.row(0), &[-1.0, 0.0]);
        assert_eq!(a.row(1)[1], 0.0);
        assert_eq!(b.row(0), &[0.0, -5.0]);
        let (again, _, m2) = center_covariates(&a, &b).unwrap();
        assert_eq!(again, a);
        assert!(m2.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn assembling() {
        let a = ds(&[vec![1.0, 2.0], vec![3.0, 4.0]], vec![0, 1]);
        let b = ds(&[vec![5.0], vec![6.0]], vec![0, 1]);
        let c = assemble_sources(&[a.clone(), b]).unwrap();
        assert_eq!(c.p(), 3);
        assert_eq!(c.sources(), &[0..2, 2..3]);
        assert_eq!(c.row(1), &[3.0, 4.0, 6.0]);
        assert_eq!(assemble_sources(&[a.clone()]).unwrap(), a);
        let bad = ds(&[vec![5.0], vec![6.0]], vec![0, 2]);
        let err = assemble_sources(&[a, bad]).unwrap_err().to_string();
        assert!(err.contains("case 2"), "{err}");
    }
}
