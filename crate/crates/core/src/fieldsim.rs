//! Seeded generators of m-dependent lattice fields and of single-index
//! regression data.
//!
//! Every field is a finite-window moving average of i.i.d. standard normals,
//! so sites further apart than the window are independent and any strong
//! mixing condition holds with `alpha(u) = 0` beyond the window. Base noise is
//! drawn on the region padded by the window radius, in lexicographic order,
//! so every in-region site is fully windowed.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{LatticeRegion, RegressionDataset, ScalarField};
use crate::rng::{derive_seed, rng_from_seed, Rng};

/// Minimum number of draws accepted by the Monte Carlo oracle.
pub const MIN_ORACLE_REPLICATES: usize = 1_000;
/// Stream index reserved for the oracle draws of a [`SingleIndexSpec`].
const ORACLE_STREAM: u64 = 0x5167_e000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaWeights {
    /// Equal weights on the whole `(2r+1)^N` box, scaled to unit variance.
    Uniform,
    /// Equal weights on the l1 ball `|u|_1 <= r`, scaled to unit variance.
    /// With `r = 1` this is a site and its `2N` axis neighbors.
    Diamond,
    /// One weight per box offset, offsets in lexicographic order.
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FieldKind {
    WhiteNoise,
    MovingAverage { radius: usize, weights: MaWeights },
    /// Moving average with Gaussian-shaped weights `exp(-|u|^2 / (2 range^2))`
    /// truncated at radius `ceil(3 range)`, scaled to unit variance.
    GaussianDecay { range: f64 },
}

impl FieldKind {
    pub fn name(&self) -> &'static str {
        match self {
            FieldKind::WhiteNoise => "white-noise",
            FieldKind::MovingAverage { .. } => "moving-average",
            FieldKind::GaussianDecay { .. } => "gaussian-decay",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub kind: FieldKind,
    pub dims: Vec<usize>,
    pub seed: u64,
}

impl FieldSpec {
    pub fn white_noise(dims: Vec<usize>, seed: u64) -> Self {
        FieldSpec {
            kind: FieldKind::WhiteNoise,
            dims,
            seed,
        }
    }

    pub fn moving_average(dims: Vec<usize>, radius: usize, weights: MaWeights, seed: u64) -> Self {
        FieldSpec {
            kind: FieldKind::MovingAverage { radius, weights },
            dims,
            seed,
        }
    }

    /// Window radius and per-offset weights over the `(2r+1)^N` box.
    pub fn window(&self) -> Result<(usize, Vec<f64>)> {
        let ndim = self.dims.len();
        match &self.kind {
            FieldKind::WhiteNoise => Ok((0, vec![1.0])),
            FieldKind::MovingAverage { radius, weights } => {
                let r = *radius;
                let offsets = box_offsets(ndim, r);
                let w = match weights {
                    MaWeights::Uniform => vec![1.0; offsets.len()],
                    MaWeights::Diamond => offsets
                        .iter()
                        .map(|o| {
                            if o.iter().map(|c| c.unsigned_abs()).sum::<u64>() <= r as u64 {
                                1.0
                            } else {
                                0.0
                            }
                        })
                        .collect(),
                    MaWeights::Explicit(w) => {
                        if w.len() != offsets.len() {
                            return Err(Error::InvalidSpec(format!(
                                "radius {r} in {ndim} dimensions needs {} weights, got {}",
                                offsets.len(),
                                w.len()
                            )));
                        }
                        if w.iter().any(|v| !v.is_finite()) {
                            return Err(Error::InvalidSpec("weights must be finite".into()));
                        }
                        return Ok((r, w.clone()));
                    }
                };
                Ok((r, unit_variance(w)))
            }
            FieldKind::GaussianDecay { range } => {
                if !(*range > 0.0 && range.is_finite()) {
                    return Err(Error::InvalidSpec(format!("range must be > 0, got {range}")));
                }
                let r = (3.0 * range).ceil() as usize;
                let w = box_offsets(ndim, r)
                    .iter()
                    .map(|o| {
                        let sq: i64 = o.iter().map(|c| c * c).sum();
                        (-(sq as f64) / (2.0 * range * range)).exp()
                    })
                    .collect();
                Ok((r, unit_variance(w)))
            }
        }
    }
}

fn unit_variance(mut w: Vec<f64>) -> Vec<f64> {
    let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        w.iter_mut().for_each(|v| *v /= norm);
    }
    w
}

/// Offsets of the box `|u|_inf <= r`, lexicographic.
fn box_offsets(ndim: usize, r: usize) -> Vec<Vec<i64>> {
    let side = 2 * r + 1;
    (0..side.pow(ndim as u32))
        .map(|mut idx| {
            let mut off = vec![0i64; ndim];
            for k in (0..ndim).rev() {
                off[k] = (idx % side) as i64 - r as i64;
                idx /= side;
            }
            off
        })
        .collect()
}

fn normals(rng: &mut Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Convolves i.i.d. noise on the padded region with `weights`.
fn windowed(region: &LatticeRegion, radius: usize, weights: &[f64], rng: &mut Rng) -> Vec<f64> {
    let padded = region.padded(radius);
    let base = normals(rng, padded.cardinality());
    if radius == 0 {
        return base.iter().map(|v| v * weights[0]).collect();
    }
    let offsets = box_offsets(region.ndim(), radius);
    // Linear stride of each offset inside the padded region.
    let strides: Vec<isize> = {
        let mut s = vec![1isize; padded.ndim()];
        for k in (0..padded.ndim().saturating_sub(1)).rev() {
            s[k] = s[k + 1] * padded.dims()[k + 1] as isize;
        }
        s
    };
    let taps: Vec<(isize, f64)> = offsets
        .iter()
        .zip(weights)
        .filter(|(_, &w)| w != 0.0)
        .map(|(o, &w)| (o.iter().zip(&strides).map(|(c, s)| *c as isize * s).sum(), w))
        .collect();
    region
        .iter()
        .map(|site| {
            let centre = padded.linear_index(&site).expect("padding contains region") as isize;
            taps.iter()
                .map(|(shift, w)| w * base[(centre + shift) as usize])
                .sum()
        })
        .collect()
}

pub fn generate_field(spec: &FieldSpec) -> Result<ScalarField> {
    let region = LatticeRegion::new(spec.dims.clone())?;
    let (radius, weights) = spec.window()?;
    let mut rng = rng_from_seed(spec.seed);
    let values = windowed(&region, radius, &weights, &mut rng);
    ScalarField::new(region, values)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Link {
    Identity,
    Cubic,
    Sine,
}

impl Link {
    pub fn apply(self, t: f64) -> f64 {
        match self {
            Link::Identity => t,
            Link::Cubic => t * t * t,
            Link::Sine => t.sin(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Link::Identity => "identity",
            Link::Cubic => "cubic",
            Link::Sine => "sine",
        }
    }
}

impl fmt::Display for Link {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Link {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(Link::Identity),
            "cubic" => Ok(Link::Cubic),
            "sine" => Ok(Link::Sine),
            other => Err(Error::Parse(format!("unknown link `{other}`"))),
        }
    }
}

/// `Y_i = link(beta^T X_i) + noise_std * eps_i` with Gaussian covariates
/// correlated across sites.
///
/// Each covariate coordinate is `sqrt(1 - rho) * eta_i + sqrt(rho) * zeta_i`
/// where `eta` is white noise and `zeta` a unit-variance box moving average of
/// radius 1, so every `X_i` is marginally `N(0, I_d)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleIndexSpec {
    pub dims: Vec<usize>,
    pub beta: Vec<f64>,
    pub link: Link,
    pub noise_std: f64,
    pub rho: f64,
    pub seed: u64,
}

impl SingleIndexSpec {
    /// A spec with `beta = e1` in dimension `d`.
    pub fn axis(dims: Vec<usize>, d: usize, link: Link, noise_std: f64, seed: u64) -> Self {
        let mut beta = vec![0.0; d];
        if d > 0 {
            beta[0] = 1.0;
        }
        SingleIndexSpec {
            dims,
            beta,
            link,
            noise_std,
            rho: 0.0,
            seed,
        }
    }

    pub fn d(&self) -> usize {
        self.beta.len()
    }

    pub fn n_hat(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn validate(&self) -> Result<()> {
        if self.beta.is_empty() {
            return Err(Error::InvalidSpec("covariate dimension must be >= 1".into()));
        }
        let norm = self.beta.iter().map(|b| b * b).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidSpec(format!("beta must have unit norm, has {norm}")));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "noise std must be >= 0, got {}",
                self.noise_std
            )));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::InvalidSpec(format!("rho must lie in [0, 1), got {}", self.rho)));
        }
        LatticeRegion::new(self.dims.clone())?;
        Ok(())
    }

    /// Copy with other lattice dims and seed.
    pub fn resized(&self, dims: Vec<usize>, seed: u64) -> Self {
        SingleIndexSpec {
            dims,
            seed,
            ..self.clone()
        }
    }

    fn response(&self, x: &[f64], noise: f64) -> f64 {
        let index: f64 = self.beta.iter().zip(x).map(|(b, v)| b * v).sum();
        self.link.apply(index) + self.noise_std * noise
    }
}

pub fn generate_single_index(spec: &SingleIndexSpec) -> Result<RegressionDataset> {
    spec.validate()?;
    let region = LatticeRegion::new(spec.dims.clone())?;
    let n = region.cardinality();
    let d = spec.d();
    let mut rng = rng_from_seed(spec.seed);
    let smooth_weights = unit_variance(vec![1.0; 3usize.pow(region.ndim() as u32)]);
    let (a, b) = ((1.0 - spec.rho).sqrt(), spec.rho.sqrt());

    let mut columns = Vec::with_capacity(d);
    for _ in 0..d {
        let eta = normals(&mut rng, n);
        let zeta = windowed(&region, 1, &smooth_weights, &mut rng);
        columns.push(eta.iter().zip(&zeta).map(|(e, z)| a * e + b * z).collect::<Vec<f64>>());
    }
    let eps = normals(&mut rng, n);

    let mut xs = Vec::with_capacity(n * d);
    let mut ys = Vec::with_capacity(n);
    for i in 0..n {
        let row: Vec<f64> = columns.iter().map(|c| c[i]).collect();
        ys.push(spec.response(&row, eps[i]));
        xs.extend(row);
    }
    RegressionDataset::new(d, xs, ys)?.with_sites(region.iter().collect())
}

/// Monte Carlo value of `var E(X | Y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaEOracle {
    /// Binned conditional-mean estimate.
    pub binned: DMatrix<f64>,
    /// `beta beta^T / (1 + noise^2)`, available for the identity link.
    pub closed_form: Option<DMatrix<f64>>,
    pub replicates: usize,
    pub bins: usize,
}

impl SigmaEOracle {
    /// The closed form when there is one, the binned estimate otherwise.
    pub fn best(&self) -> &DMatrix<f64> {
        self.closed_form.as_ref().unwrap_or(&self.binned)
    }
}

/// Estimates `var E(X|Y)` from `replicates` independent draws of the model,
/// binning the responses into `floor(replicates^{1/3})` equal-count bins.
pub fn ground_truth_sigma_e(spec: &SingleIndexSpec, replicates: usize) -> Result<SigmaEOracle> {
    let bins = (replicates as f64).cbrt().floor() as usize;
    ground_truth_sigma_e_with_bins(spec, replicates, bins)
}

pub fn ground_truth_sigma_e_with_bins(
    spec: &SingleIndexSpec,
    replicates: usize,
    bins: usize,
) -> Result<SigmaEOracle> {
    spec.validate()?;
    if replicates < MIN_ORACLE_REPLICATES {
        return Err(Error::InsufficientReplicates {
            needed: MIN_ORACLE_REPLICATES,
            got: replicates,
        });
    }
    if bins == 0 || bins > replicates {
        return Err(Error::InvalidSpec(format!("{bins} bins for {replicates} draws")));
    }
    let d = spec.d();
    // Covariates are marginally N(0, I_d) whatever rho is, so i.i.d. draws
    // sample the same joint law of (X, Y).
    let mut rng = rng_from_seed(derive_seed(spec.seed, ORACLE_STREAM));
    let mut xs = vec![0.0; replicates * d];
    let mut ys = vec![0.0; replicates];
    for i in 0..replicates {
        let row = &mut xs[i * d..(i + 1) * d];
        row.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
        let eps: f64 = rng.sample(StandardNormal);
        ys[i] = spec.response(row, eps);
    }
    let mut order: Vec<usize> = (0..replicates).collect();
    order.sort_by(|&a, &b| ys[a].total_cmp(&ys[b]).then(a.cmp(&b)));

    let mut means = Vec::with_capacity(bins);
    for g in 0..bins {
        let members = &order[g * replicates / bins..(g + 1) * replicates / bins];
        let mut m = vec![0.0; d];
        for &i in members {
            m.iter_mut().zip(&xs[i * d..(i + 1) * d]).for_each(|(a, v)| *a += v);
        }
        m.iter_mut().for_each(|a| *a /= members.len() as f64);
        means.push((members.len() as f64 / replicates as f64, m));
    }
    let mut grand = vec![0.0; d];
    for (p, m) in &means {
        grand.iter_mut().zip(m).for_each(|(g, v)| *g += p * v);
    }
    let mut binned = DMatrix::zeros(d, d);
    for (p, m) in &means {
        for r in 0..d {
            for c in 0..d {
                binned[(r, c)] += p * (m[r] - grand[r]) * (m[c] - grand[c]);
            }
        }
    }
    let closed_form = (spec.link == Link::Identity).then(|| {
        let beta = DMatrix::from_column_slice(d, 1, &spec.beta);
        &beta * beta.transpose() / (1.0 + spec.noise_std * spec.noise_std)
    });
    Ok(SigmaEOracle {
        binned,
        closed_form,
        replicates,
        bins,
    })
}
