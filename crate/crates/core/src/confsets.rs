//! Confidence sets of sparse linear regression models.
//!
//! For a postulated column subset `X0`, synthetic replicates of `Y` are
//! projected onto the orthogonal complement of `col(X0)` and normalized.
//! Under the model these directions are iid uniform on a sphere of
//! dimension `ν = n - d0`, so their pairwise cosines have a known law.

use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::exec::Execution;
use crate::numerics::linalg::{dot, Cholesky, HouseholderQr, Matrix};
use crate::numerics::special::{inc_beta_with, ln_beta};
use crate::numerics::RngStream;
use crate::replication::{assess, AssessmentResult, USample};

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionData {
    x: Matrix,
    y: Vec<f64>,
    sigma: Option<f64>,
}

impl RegressionData {
    pub fn new(x: Matrix, y: Vec<f64>, sigma: Option<f64>) -> Result<Self> {
        if x.rows() != y.len() {
            return domain(format!("X has {} rows but Y has {} entries", x.rows(), y.len()));
        }
        if x.rows() < 4 || x.cols() == 0 {
            return domain("need at least 4 observations and 1 covariate");
        }
        if let Some(s) = sigma {
            if !(s > 0.0 && s.is_finite()) {
                return domain(format!("sigma must be positive, got {s}"));
            }
        }
        if y.iter().any(|v| !v.is_finite()) {
            return domain("Y contains non-finite values");
        }
        Ok(Self { x, y, sigma })
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn d(&self) -> usize {
        self.x.cols()
    }

    /// The known noise level, or the residual standard deviation of the
    /// full model when none was supplied.
    pub fn sigma(&self) -> Result<f64> {
        if let Some(s) = self.sigma {
            return Ok(s);
        }
        let (n, d) = (self.n(), self.d());
        if n <= d {
            return Err(Error::Degenerate("cannot estimate sigma with n <= d".into()));
        }
        let qr = HouseholderQr::new(&self.x)?;
        let r = qr.apply_qt(&self.y);
        let rss: f64 = r[d..].iter().map(|v| v * v).sum();
        Ok((rss / (n - d) as f64).sqrt())
    }
}

/// A sorted set of column indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct ModelId(Vec<usize>);

impl ModelId {
    pub fn new(mut columns: Vec<usize>, d: usize) -> Result<Self> {
        columns.sort_unstable();
        if columns.windows(2).any(|w| w[0] == w[1]) {
            return domain("model columns must be distinct");
        }
        if let Some(c) = columns.iter().find(|&&c| c >= d) {
            return domain(format!("column {c} is out of range for {d} covariates"));
        }
        Ok(Self(columns))
    }

    pub fn columns(&self) -> &[usize] {
        &self.0
    }

    pub fn d0(&self) -> usize {
        self.0.len()
    }

    pub fn label(&self) -> String {
        self.0.iter().map(|c| c.to_string()).collect::<Vec<_>>().join("+")
    }
}

/// All subsets of `0..d` with sizes `1..=dmax`, by size then lexicographically.
pub fn enumerate_models(d: usize, dmax: usize) -> Vec<ModelId> {
    let mut out = Vec::new();
    for size in 1..=dmax.min(d) {
        let mut idx: Vec<usize> = (0..size).collect();
        loop {
            out.push(ModelId(idx.clone()));
            let Some(pos) = (0..size).rev().find(|&i| idx[i] < d - size + i) else {
                break;
            };
            idx[pos] += 1;
            for j in pos + 1..size {
                idx[j] = idx[j - 1] + 1;
            }
        }
    }
    out
}

/// Orthonormal basis of the orthogonal complement of `col(x0)`.
pub fn nullspace_basis(x0: &Matrix) -> Result<Matrix> {
    if x0.cols() == 0 {
        return Ok(Matrix::identity(x0.rows()));
    }
    Ok(HouseholderQr::new(x0)?.complement_basis())
}

/// `Ỹ_j = Y + √k σ (G_j - Ḡ)` with iid standard normal `G_j`.
pub fn synth_replicates(y: &[f64], k: usize, sigma: f64, rng: &mut RngStream) -> Result<Vec<Vec<f64>>> {
    if k < 2 {
        return domain(format!("need k >= 2 replicates, got {k}"));
    }
    if !(sigma > 0.0) {
        return domain(format!("sigma must be positive, got {sigma}"));
    }
    let n = y.len();
    let g: Vec<Vec<f64>> = (0..k).map(|_| (0..n).map(|_| rng.std_normal()).collect()).collect();
    let scale = (k as f64).sqrt() * sigma;
    let mut out = vec![vec![0.0; n]; k];
    for i in 0..n {
        let mean = g.iter().map(|gj| gj[i]).sum::<f64>() / k as f64;
        for (o, gj) in out.iter_mut().zip(&g) {
            o[i] = y[i] + scale * (gj[i] - mean);
        }
    }
    Ok(out)
}

/// All pairwise inner products `(i < j)` of unit vectors.
pub fn cosine_angles(qs: &[Vec<f64>]) -> Result<Vec<f64>> {
    for (j, q) in qs.iter().enumerate() {
        let nrm = dot(q, q).sqrt();
        if (nrm - 1.0).abs() > 1e-10 {
            return domain(format!("vector {j} has norm {nrm}, expected 1"));
        }
    }
    let mut out = Vec::with_capacity(qs.len() * qs.len().saturating_sub(1) / 2);
    for i in 0..qs.len() {
        for j in i + 1..qs.len() {
            out.push(dot(&qs[i], &qs[j]));
        }
    }
    Ok(out)
}

/// Law of the cosine between two independent uniform directions in `ν`
/// dimensions.
#[derive(Debug, Clone, Copy)]
pub struct CosineLaw {
    b: f64,
    ln_b: f64,
}

impl CosineLaw {
    pub fn new(nu: usize) -> Result<Self> {
        if nu < 3 {
            return domain(format!("the cosine law needs nu >= 3, got {nu}"));
        }
        let b = 0.5 * (nu as f64 - 1.0);
        Ok(Self { b, ln_b: ln_beta(0.5, b) })
    }

    pub fn cdf(&self, z: f64) -> f64 {
        let z = z.clamp(-1.0, 1.0);
        let half = 0.5 * inc_beta_with(z * z, 0.5, self.b, self.ln_b);
        if z >= 0.0 { 0.5 + half } else { 0.5 - half }
    }
}

pub fn fisher1915_cdf(z: f64, nu: usize) -> Result<f64> {
    if !(-1.0..=1.0).contains(&z) {
        return domain(format!("cosine {z} lies outside [-1, 1]"));
    }
    Ok(CosineLaw::new(nu)?.cdf(z))
}

fn cosines_to_u(z: &[f64], nu: usize, tag: f64) -> Result<USample> {
    let law = CosineLaw::new(nu)?;
    USample::new(z.iter().map(|&v| law.cdf(v)).collect(), tag)
}

fn check_model_size(n: usize, model: &ModelId) -> Result<()> {
    if n < model.d0() + 3 {
        return domain(format!("model of size {} leaves fewer than 3 residual dimensions", model.d0()));
    }
    Ok(())
}

/// Replicate values for one model from an explicit null-space basis.
pub fn model_u_from_replicates(x: &Matrix, model: &ModelId, reps: &[Vec<f64>]) -> Result<USample> {
    check_model_size(x.rows(), model)?;
    let v0 = nullspace_basis(&x.select_columns(model.columns()))?;
    let qs = reps
        .iter()
        .map(|r| {
            let p = v0.t_matvec(r);
            let nrm = dot(&p, &p).sqrt();
            if !(nrm > 0.0) {
                return Err(Error::Degenerate("replicate lies in the model space".into()));
            }
            Ok(p.into_iter().map(|v| v / nrm).collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    cosines_to_u(&cosine_angles(&qs)?, x.rows() - model.d0(), model.d0() as f64)
}

/// Draws `k` replicates and builds the model's replicate values.
pub fn model_u(data: &RegressionData, model: &ModelId, k: usize, rng: &mut RngStream) -> Result<USample> {
    let reps = synth_replicates(&data.y, k, data.sigma()?, rng)?;
    model_u_from_replicates(&data.x, model, &reps)
}

/// Precomputed cross-products for screening many models against one set
/// of replicates: residual inner products are `Ỹ_i'Ỹ_j - W_i'W_j` with
/// `W = L^{-1} X0'Ỹ` and `L L' = X0'X0`.
pub struct ModelScreen {
    n: usize,
    xtx: Matrix,
    xty: Matrix,
    yty: Matrix,
}

impl ModelScreen {
    pub fn new(x: &Matrix, reps: &[Vec<f64>]) -> Result<Self> {
        if reps.iter().any(|r| r.len() != x.rows()) {
            return domain("replicate length differs from the number of rows");
        }
        let ymat = Matrix::from_columns(reps)?;
        Ok(Self { n: x.rows(), xtx: x.gram(), xty: x.transpose().matmul(&ymat), yty: ymat.gram() })
    }

    pub fn u(&self, model: &ModelId) -> Result<USample> {
        check_model_size(self.n, model)?;
        let cols = model.columns();
        let d0 = cols.len();
        let k = self.yty.rows();
        let mut sub = Matrix::zeros(d0, d0);
        for (a, &ca) in cols.iter().enumerate() {
            for (b, &cb) in cols.iter().enumerate() {
                sub[(a, b)] = self.xtx[(ca, cb)];
            }
        }
        let ch = Cholesky::new(&sub)?;
        let w: Vec<Vec<f64>> = (0..k)
            .map(|j| ch.forward(&cols.iter().map(|&c| self.xty[(c, j)]).collect::<Vec<_>>()))
            .collect();
        let inner = |i: usize, j: usize| self.yty[(i, j)] - dot(&w[i], &w[j]);
        let norms: Vec<f64> = (0..k).map(|j| inner(j, j)).collect();
        if norms.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::Degenerate("replicate lies in the model space".into()));
        }
        let mut z = Vec::with_capacity(k * (k - 1) / 2);
        for i in 0..k {
            for j in i + 1..k {
                z.push((inner(i, j) / (norms[i] * norms[j]).sqrt()).clamp(-1.0, 1.0));
            }
        }
        cosines_to_u(&z, self.n - d0, d0 as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelVerdict {
    pub model: ModelId,
    pub result: AssessmentResult,
}

/// Every model of size `1..=dmax` with its assessment. A model belongs to
/// the set for a direction when that direction does not reject it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelConfidenceSet {
    pub verdicts: Vec<ModelVerdict>,
    pub alpha: f64,
}

impl ModelConfidenceSet {
    pub fn n_tested(&self) -> usize {
        self.verdicts.len()
    }

    pub fn accepted(&self, dir: crate::Direction) -> impl Iterator<Item = &ModelId> {
        self.verdicts.iter().filter(move |v| !v.result.rejects(dir)).map(|v| &v.model)
    }

    pub fn contains(&self, model: &ModelId, dir: crate::Direction) -> bool {
        self.verdicts.iter().any(|v| &v.model == model && !v.result.rejects(dir))
    }
}

/// Screens all models of size `1..=dmax` against one shared set of `k`
/// replicates.
pub fn confidence_set_models(
    data: &RegressionData,
    dmax: usize,
    k: usize,
    alpha: f64,
    rng: &mut RngStream,
    exec: Execution,
) -> Result<ModelConfidenceSet> {
    if dmax == 0 || dmax + 3 > data.n() {
        return domain(format!("dmax = {dmax} must lie in [1, n - 3]"));
    }
    let reps = synth_replicates(&data.y, k, data.sigma()?, rng)?;
    let screen = ModelScreen::new(&data.x, &reps)?;
    let models = enumerate_models(data.d(), dmax);
    let verdicts = exec.map(models.len(), |i| {
        let u = screen.u(&models[i])?;
        Ok(ModelVerdict { model: models[i].clone(), result: assess(&u, alpha)? })
    });
    Ok(ModelConfidenceSet { verdicts: verdicts.into_iter().collect::<Result<_>>()?, alpha })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct RegressionGenSpec {
    pub n: usize,
    #[serde(default = "defaults::d")]
    pub d: usize,
    #[serde(default = "defaults::s")]
    pub s: usize,
    #[serde(default = "defaults::a")]
    pub a: usize,
    #[serde(default = "defaults::rho")]
    pub rho: f64,
    #[serde(default = "defaults::theta")]
    pub theta: f64,
}

mod defaults {
    pub fn d() -> usize {
        15
    }
    pub fn s() -> usize {
        5
    }
    pub fn a() -> usize {
        3
    }
    pub fn rho() -> f64 {
        0.9
    }
    pub fn theta() -> f64 {
        1.0
    }
}

impl RegressionGenSpec {
    pub fn paper_design(n: usize) -> Self {
        Self { n, d: 15, s: 5, a: 3, rho: 0.9, theta: 1.0 }
    }
}

/// Columns `0..s` carry signal, `s..s+a` are noise correlated with them
/// (equicorrelation `rho` across the first `s + a`), the rest are
/// independent. Returns the data with known `σ = 1` and the true model.
pub fn gen_regression(spec: &RegressionGenSpec, rng: &mut RngStream) -> Result<(RegressionData, ModelId)> {
    let RegressionGenSpec { n, d, s, a, rho, theta } = *spec;
    if s + a > d || s == 0 || !(0.0..1.0).contains(&rho) {
        return Err(Error::InvalidSpec(format!("invalid design (d={d}, s={s}, a={a}, rho={rho})")));
    }
    let (common, own) = (rho.sqrt(), (1.0 - rho).sqrt());
    let mut x = Matrix::zeros(n, d);
    let mut y = vec![0.0; n];
    for i in 0..n {
        let f = rng.std_normal();
        for j in 0..d {
            let e = rng.std_normal();
            x[(i, j)] = if j < s + a { common * f + own * e } else { e };
        }
        y[i] = theta * (0..s).map(|j| x[(i, j)]).sum::<f64>() + rng.std_normal();
    }
    Ok((RegressionData::new(x, y, Some(1.0))?, ModelId((0..s).collect())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_count() {
        assert_eq!(enumerate_models(15, 5).len(), 4943);
        assert_eq!(enumerate_models(4, 4).len(), 15);
        assert_eq!(enumerate_models(3, 2)[3], ModelId(vec![0, 1]));
    }

    #[test]
    fn cosine_law_edges() {
        assert_eq!(fisher1915_cdf(0.0, 20).unwrap(), 0.5);
        for z in [-0.9, -0.3, 0.2, 0.75] {
            assert!((fisher1915_cdf(z, 3).unwrap() - 0.5 * (z + 1.0)).abs() < 1e-14);
        }
        assert_eq!(fisher1915_cdf(-1.0, 7).unwrap(), 0.0);
        assert_eq!(fisher1915_cdf(1.0, 7).unwrap(), 1.0);
        assert!(fisher1915_cdf(0.1, 2).is_err());
    }

    #[test]
    fn cosines_of_simple_vectors() {
        let e1 = vec![1.0, 0.0, 0.0];
        let e2 = vec![0.0, 1.0, 0.0];
        assert_eq!(cosine_angles(&[e1.clone(), e2]).unwrap(), vec![0.0]);
        assert_eq!(cosine_angles(&[e1.clone(), e1]).unwrap(), vec![1.0]);
        assert!(cosine_angles(&[vec![2.0, 0.0]]).is_err());
    }

    #[test]
    fn replicates_are_centered() {
        let y = vec![1.0, -2.0, 0.5, 3.0];
        let reps = synth_replicates(&y, 5, 1.3, &mut RngStream::new(2, 0)).unwrap();
        for i in 0..4 {
            let dev: f64 = reps.iter().map(|r| r[i] - y[i]).sum();
            assert!(dev.abs() < 1e-12);
        }
    }

    #[test]
    fn model_validation() {
        assert!(ModelId::new(vec![1, 1], 4).is_err());
        assert!(ModelId::new(vec![4], 4).is_err());
        assert_eq!(ModelId::new(vec![3, 0], 4).unwrap().columns(), &[0, 3]);
    }
}
