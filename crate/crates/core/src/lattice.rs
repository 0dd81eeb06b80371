//! Rectangular lattice geometry, nearest-neighbor vicinities and the
//! associated regression process `Z_i = (xi_i^d, xi_i)`.
//!
//! Neighbors are ordered by squared Euclidean distance, ties broken by the
//! lexicographic order of the coordinate offset. Iteration over a region is
//! lexicographic in the site index (first coordinate slowest), which makes
//! every downstream result reproducible bit for bit.

use std::cmp::Ordering;
use std::fmt;

use crate::error::{Error, Result};

/// A lattice site `i = (i_1, ..., i_N)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Site(Vec<i64>);

impl Site {
    pub fn new(coords: Vec<i64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidSpec("a site needs at least one coordinate".into()));
        }
        Ok(Site(coords))
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn ndim(&self) -> usize {
        self.0.len()
    }

    /// `self + offset`, coordinate-wise.
    pub fn offset(&self, offset: &[i64]) -> Site {
        Site(self.0.iter().zip(offset).map(|(a, b)| a + b).collect())
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (k, c) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl From<&[i64]> for Site {
    fn from(coords: &[i64]) -> Self {
        Site(coords.to_vec())
    }
}

/// The rectangle `{ i : origin_k <= i_k < origin_k + n_k }`.
///
/// [`LatticeRegion::new`] uses the conventional origin `(1, ..., 1)`; an
/// explicit origin describes observed sub-rectangles of a larger field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatticeRegion {
    origin: Vec<i64>,
    dims: Vec<usize>,
}

impl LatticeRegion {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        let origin = vec![1; dims.len()];
        Self::with_origin(origin, dims)
    }

    pub fn with_origin(origin: Vec<i64>, dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::EmptyRegion);
        }
        if origin.len() != dims.len() {
            return Err(Error::InvalidSpec(format!(
                "origin has {} coordinates but dims has {}",
                origin.len(),
                dims.len()
            )));
        }
        Ok(LatticeRegion { origin, dims })
    }

    /// A hypercube with `n_hat` sites in `ndim` dimensions. `n_hat` must be an
    /// exact `ndim`-th power.
    pub fn hypercube(n_hat: usize, ndim: usize) -> Result<Self> {
        if ndim == 0 || n_hat == 0 {
            return Err(Error::EmptyRegion);
        }
        let side = (n_hat as f64).powf(1.0 / ndim as f64).round() as usize;
        if side.checked_pow(ndim as u32) != Some(n_hat) {
            return Err(Error::InvalidSpec(format!(
                "{n_hat} is not a perfect {ndim}-th power"
            )));
        }
        Self::new(vec![side; ndim])
    }

    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn origin(&self) -> &[i64] {
        &self.origin
    }

    /// `n_hat = n_1 * ... * n_N`.
    pub fn cardinality(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn contains(&self, site: &Site) -> bool {
        site.ndim() == self.ndim()
            && site
                .coords()
                .iter()
                .zip(&self.origin)
                .zip(&self.dims)
                .all(|((&c, &o), &n)| c >= o && c < o + n as i64)
    }

    /// Whether every site of `other` belongs to `self`.
    pub fn contains_region(&self, other: &LatticeRegion) -> bool {
        other.ndim() == self.ndim()
            && other
                .origin
                .iter()
                .zip(&other.dims)
                .zip(self.origin.iter().zip(&self.dims))
                .all(|((&oo, &on), (&so, &sn))| oo >= so && oo + on as i64 <= so + sn as i64)
    }

    /// Position of `site` in lexicographic iteration order.
    pub fn linear_index(&self, site: &Site) -> Option<usize> {
        if !self.contains(site) {
            return None;
        }
        let mut idx = 0usize;
        for ((&c, &o), &n) in site.coords().iter().zip(&self.origin).zip(&self.dims) {
            idx = idx * n + (c - o) as usize;
        }
        Some(idx)
    }

    pub fn site_at(&self, mut idx: usize) -> Site {
        let mut coords = vec![0i64; self.ndim()];
        for k in (0..self.ndim()).rev() {
            coords[k] = self.origin[k] + (idx % self.dims[k]) as i64;
            idx /= self.dims[k];
        }
        Site(coords)
    }

    /// Sites in lexicographic order.
    pub fn iter(&self) -> impl Iterator<Item = Site> + '_ {
        (0..self.cardinality()).map(move |i| self.site_at(i))
    }

    /// The region grown by `pad` sites on every side.
    pub fn padded(&self, pad: usize) -> LatticeRegion {
        LatticeRegion {
            origin: self.origin.iter().map(|o| o - pad as i64).collect(),
            dims: self.dims.iter().map(|n| n + 2 * pad).collect(),
        }
    }

    fn max_extent(&self) -> usize {
        self.dims.iter().copied().max().unwrap_or(1)
    }
}

fn compare_offsets(a: &(i64, Vec<i64>), b: &(i64, Vec<i64>)) -> Ordering {
    a.0.cmp(&b.0).then_with(|| a.1.cmp(&b.1))
}

/// All nonzero offsets with sup-norm at most `radius`, keyed by squared norm.
fn cube_offsets(ndim: usize, radius: i64) -> Vec<(i64, Vec<i64>)> {
    let side = (2 * radius + 1) as usize;
    let total = side.pow(ndim as u32);
    let mut out = Vec::with_capacity(total.saturating_sub(1));
    for mut idx in 0..total {
        let mut off = vec![0i64; ndim];
        for k in (0..ndim).rev() {
            off[k] = (idx % side) as i64 - radius;
            idx /= side;
        }
        let sq: i64 = off.iter().map(|c| c * c).sum();
        if sq > 0 {
            out.push((sq, off));
        }
    }
    out
}

/// The `count` nearest nonzero offsets of `Z^ndim` in neighbor order. This is
/// the translation-invariant vicinity `V` with `V_j = j + V`.
pub fn vicinity_offsets(ndim: usize, count: usize) -> Vec<Vec<i64>> {
    if count == 0 || ndim == 0 {
        return Vec::new();
    }
    let mut radius = 1i64;
    loop {
        let mut offs = cube_offsets(ndim, radius);
        offs.sort_by(compare_offsets);
        // The cube holds every offset with squared norm <= radius^2.
        if offs.len() >= count && offs[count - 1].0 <= radius * radius {
            offs.truncate(count);
            return offs.into_iter().map(|(_, o)| o).collect();
        }
        radius *= 2;
    }
}

/// The `count` sites of `region \ {site}` closest to `site`, ordered by
/// (distance, lexicographic offset).
pub fn neighbor_ordering(site: &Site, region: &LatticeRegion, count: usize) -> Result<Vec<Site>> {
    if !region.contains(site) {
        return Err(Error::OutOfRegion(site.to_string()));
    }
    if count >= region.cardinality() {
        return Err(Error::InsufficientRegion(format!(
            "asked for {count} neighbors in a region of {} sites",
            region.cardinality()
        )));
    }
    let full = region.max_extent() as i64;
    let mut radius = 1i64;
    loop {
        let mut cands: Vec<(i64, Vec<i64>)> = cube_offsets(region.ndim(), radius)
            .into_iter()
            .filter(|(_, off)| region.contains(&site.offset(off)))
            .collect();
        cands.sort_by(compare_offsets);
        let complete = radius >= full;
        let settled = cands.len() >= count && cands[count - 1].0 <= radius * radius;
        if settled || complete {
            return Ok(cands
                .into_iter()
                .take(count)
                .map(|(_, off)| site.offset(&off))
                .collect());
        }
        radius = (radius * 2).min(full);
    }
}

/// Values `xi_i` on every site of a region, stored in lexicographic order.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    region: LatticeRegion,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(region: LatticeRegion, values: Vec<f64>) -> Result<Self> {
        if values.len() != region.cardinality() {
            return Err(Error::InvalidSpec(format!(
                "field has {} values for a region of {} sites",
                values.len(),
                region.cardinality()
            )));
        }
        Ok(ScalarField { region, values })
    }

    pub fn from_fn(region: LatticeRegion, mut f: impl FnMut(&Site) -> f64) -> Self {
        let values = region.iter().map(|s| f(&s)).collect();
        ScalarField { region, values }
    }

    pub fn region(&self) -> &LatticeRegion {
        &self.region
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, site: &Site) -> Option<f64> {
        self.region.linear_index(site).map(|i| self.values[i])
    }

    /// Mutable access, used to perturb fields in experiments.
    pub fn set(&mut self, site: &Site, value: f64) -> Result<()> {
        let idx = self
            .region
            .linear_index(site)
            .ok_or_else(|| Error::OutOfRegion(site.to_string()))?;
        self.values[idx] = value;
        Ok(())
    }

    /// Mean and population variance over the sites of `sub`.
    pub fn moments_over(&self, sub: &LatticeRegion) -> (f64, f64) {
        let vals: Vec<f64> = sub.iter().filter_map(|s| self.get(&s)).collect();
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        (mean, var)
    }
}

/// Samples `Z_i = (X_i, Y_i)` with `X_i` in `R^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionDataset {
    dim: usize,
    xs: Vec<f64>,
    ys: Vec<f64>,
    mean_x: Vec<f64>,
    sites: Option<Vec<Site>>,
}

fn column_means(dim: usize, xs: &[f64]) -> Vec<f64> {
    let n = xs.len() / dim;
    let mut mean = vec![0.0; dim];
    for row in xs.chunks_exact(dim) {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    mean
}

impl RegressionDataset {
    /// Builds a dataset from row-major covariates `xs` (`n * dim` values) and
    /// responses `ys`.
    pub fn new(dim: usize, xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidSpec("covariate dimension must be >= 1".into()));
        }
        if xs.len() != dim * ys.len() {
            return Err(Error::InvalidSpec(format!(
                "{} covariate values do not form {} rows of length {dim}",
                xs.len(),
                ys.len()
            )));
        }
        if ys.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mean_x = column_means(dim, &xs);
        Ok(RegressionDataset {
            dim,
            xs,
            ys,
            mean_x,
            sites: None,
        })
    }

    pub fn from_rows(rows: &[(Vec<f64>, f64)]) -> Result<Self> {
        let dim = rows.first().map(|r| r.0.len()).ok_or(Error::EmptyDataset)?;
        if rows.iter().any(|r| r.0.len() != dim) {
            return Err(Error::InvalidSpec("covariate rows differ in length".into()));
        }
        let xs = rows.iter().flat_map(|r| r.0.iter().copied()).collect();
        let ys = rows.iter().map(|r| r.1).collect();
        Self::new(dim, xs, ys)
    }

    pub fn with_sites(mut self, sites: Vec<Site>) -> Result<Self> {
        if sites.len() != self.len() {
            return Err(Error::InvalidSpec("one site tag per sample required".into()));
        }
        self.sites = Some(sites);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn x(&self, i: usize) -> &[f64] {
        &self.xs[i * self.dim..(i + 1) * self.dim]
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn mean_x(&self) -> &[f64] {
        &self.mean_x
    }

    pub fn sites(&self) -> Option<&[Site]> {
        self.sites.as_deref()
    }

    pub fn mean_y(&self) -> f64 {
        self.ys.iter().sum::<f64>() / self.len() as f64
    }

    /// Sample standard deviation of the responses (n - 1 denominator).
    pub fn std_y(&self) -> f64 {
        let n = self.len();
        if n < 2 {
            return 0.0;
        }
        let m = self.mean_y();
        let ss: f64 = self.ys.iter().map(|y| (y - m) * (y - m)).sum();
        (ss / (n - 1) as f64).sqrt()
    }

    /// Samples at the given positions, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let xs = indices.iter().flat_map(|&i| self.x(i).iter().copied()).collect();
        let ys = indices.iter().map(|&i| self.ys[i]).collect();
        let mut out = Self::new(self.dim, xs, ys)?;
        if let Some(sites) = &self.sites {
            out.sites = Some(indices.iter().map(|&i| sites[i].clone()).collect());
        }
        Ok(out)
    }

    /// Applies `f` to every covariate vector, keeping responses and tags.
    pub fn map_x(&self, mut f: impl FnMut(&[f64]) -> Vec<f64>) -> Result<Self> {
        let mut xs = Vec::with_capacity(self.xs.len());
        let mut dim = None;
        for i in 0..self.len() {
            let row = f(self.x(i));
            if *dim.get_or_insert(row.len()) != row.len() {
                return Err(Error::InvalidSpec("mapped rows differ in length".into()));
            }
            xs.extend(row);
        }
        let mut out = Self::new(dim.unwrap_or(self.dim), xs, self.ys.clone())?;
        out.sites = self.sites.clone();
        Ok(out)
    }
}

/// Builds `Z_i = (xi_i^d, xi_i)` for every site of `observed` whose whole
/// `d`-nearest-neighbor vicinity is observed. Sites whose vicinity leaves
/// `observed` are dropped. Samples come out in lexicographic site order.
pub fn build_associated_process(
    field: &ScalarField,
    d: usize,
    observed: &LatticeRegion,
) -> Result<RegressionDataset> {
    associated_process_where(field, d, observed, |_| true)
}

/// [`build_associated_process`] restricted to sites accepted by `keep`.
pub fn associated_process_where(
    field: &ScalarField,
    d: usize,
    observed: &LatticeRegion,
    mut keep: impl FnMut(&Site) -> bool,
) -> Result<RegressionDataset> {
    if d == 0 {
        return Err(Error::InvalidSpec("number of neighbors must be >= 1".into()));
    }
    if !field.region().contains_region(observed) {
        return Err(Error::OutOfRegion("observed region is not inside the field".into()));
    }
    if d >= observed.cardinality() {
        return Err(Error::InsufficientRegion(format!(
            "{d} neighbors requested in an observed region of {} sites",
            observed.cardinality()
        )));
    }
    let offsets = vicinity_offsets(observed.ndim(), d);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut sites = Vec::new();
    'sites: for site in observed.iter() {
        if !keep(&site) {
            continue;
        }
        let start = xs.len();
        for off in &offsets {
            let nb = site.offset(off);
            if !observed.contains(&nb) {
                xs.truncate(start);
                continue 'sites;
            }
            xs.push(field.get(&nb).expect("observed lies inside the field"));
        }
        ys.push(field.get(&site).expect("observed lies inside the field"));
        sites.push(site);
    }
    if ys.is_empty() {
        return Err(Error::EmptyDataset);
    }
    RegressionDataset::new(d, xs, ys)?.with_sites(sites)
}

/// Whether the `d`-vicinity of `site` lies inside `observed`.
pub fn vicinity_observed(site: &Site, d: usize, observed: &LatticeRegion) -> bool {
    vicinity_offsets(observed.ndim(), d)
        .iter()
        .all(|off| observed.contains(&site.offset(off)))
}

/// The vector `xi_site^d` read from `field`, requiring the vicinity to lie in
/// `observed`.
pub fn vicinity_values(
    field: &ScalarField,
    site: &Site,
    d: usize,
    observed: &LatticeRegion,
) -> Result<Vec<f64>> {
    vicinity_offsets(observed.ndim(), d)
        .iter()
        .map(|off| {
            let nb = site.offset(off);
            if !observed.contains(&nb) {
                return Err(Error::OutOfRegion(format!(
                    "neighbor {nb} of {site} is not observed"
                )));
            }
            field.get(&nb).ok_or_else(|| Error::OutOfRegion(nb.to_string()))
        })
        .collect()
}

/// Subtracts the covariate mean. Returns the centered dataset and the mean
/// that was removed; responses are left untouched.
pub fn center_dataset(data: &RegressionDataset) -> Result<(RegressionDataset, Vec<f64>)> {
    if data.len() < 2 {
        return Err(Error::DegenerateDataset(format!(
            "centering needs at least 2 samples, got {}",
            data.len()
        )));
    }
    let dim = data.dim();
    let mut shift = data.mean_x().to_vec();
    let mut xs: Vec<f64> = data.xs().to_vec();
    subtract_rows(&mut xs, &shift);
    // Second pass removes the rounding residue of the first.
    let residue = column_means(dim, &xs);
    subtract_rows(&mut xs, &residue);
    shift.iter_mut().zip(&residue).for_each(|(s, r)| *s += r);

    let mut out = RegressionDataset::new(dim, xs, data.ys().to_vec())?;
    out.sites = data.sites.clone();
    Ok((out, shift))
}

fn subtract_rows(xs: &mut [f64], shift: &[f64]) {
    for row in xs.chunks_exact_mut(shift.len()) {
        row.iter_mut().zip(shift).for_each(|(v, s)| *v -= s);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn site(c: &[i64]) -> Site {
        Site::from(c)
    }

    #[test]
    fn four_nearest_in_offset_order() {
        let region = LatticeRegion::new(vec![10, 10]).unwrap();
        let got = neighbor_ordering(&site(&[5, 5]), &region, 4).unwrap();
        let want: Vec<Site> = [[4, 5], [5, 4], [5, 6], [6, 5]].iter().map(|c| site(c)).collect();
        assert_eq!(got, want);
    }

    #[test]
    fn eight_nearest_adds_diagonals() {
        let region = LatticeRegion::new(vec![10, 10]).unwrap();
        let got = neighbor_ordering(&site(&[5, 5]), &region, 8).unwrap();
        let want: Vec<Site> = [
            [4, 5],
            [5, 4],
            [5, 6],
            [6, 5],
            [4, 4],
            [4, 6],
            [6, 4],
            [6, 6],
        ]
        .iter()
        .map(|c| site(c))
        .collect();
        assert_eq!(got, want);
    }

    #[test]
    fn ordering_errors() {
        let region = LatticeRegion::new(vec![3, 3]).unwrap();
        assert!(matches!(
            neighbor_ordering(&site(&[2, 2]), &region, 9),
            Err(Error::InsufficientRegion(_))
        ));
        assert!(matches!(
            neighbor_ordering(&site(&[4, 2]), &region, 2),
            Err(Error::OutOfRegion(_))
        ));
        // count = n_hat - 1 takes the whole rest of the region
        let all = neighbor_ordering(&site(&[1, 1]), &region, 8).unwrap();
        assert_eq!(all.len(), 8);
    }

    #[test]
    fn corner_site_skips_missing_neighbors() {
        let region = LatticeRegion::new(vec![10, 10]).unwrap();
        let got = neighbor_ordering(&site(&[1, 1]), &region, 3).unwrap();
        assert_eq!(got, vec![site(&[1, 2]), site(&[2, 1]), site(&[2, 2])]);
    }

    #[test]
    fn region_indexing_round_trips() {
        let region = LatticeRegion::with_origin(vec![-2, 3, 0], vec![3, 4, 2]).unwrap();
        for (i, s) in region.iter().enumerate() {
            assert_eq!(region.linear_index(&s), Some(i));
        }
        assert_eq!(region.site_at(0), site(&[-2, 3, 0]));
        assert_eq!(region.site_at(1), site(&[-2, 3, 1]));
        assert!(!region.contains(&site(&[1, 3, 0])));
    }

    #[test]
    fn empty_region_rejected() {
        assert!(matches!(LatticeRegion::new(vec![4, 0]), Err(Error::EmptyRegion)));
        assert!(matches!(LatticeRegion::new(vec![]), Err(Error::EmptyRegion)));
    }

    #[test]
    fn hypercube_sizes() {
        assert_eq!(LatticeRegion::hypercube(3600, 2).unwrap().dims(), &[60, 60]);
        assert!(LatticeRegion::hypercube(3601, 2).is_err());
    }

    #[test]
    fn constant_field_samples() {
        let region = LatticeRegion::new(vec![6, 6]).unwrap();
        let field = ScalarField::from_fn(region.clone(), |_| 2.5);
        let data = build_associated_process(&field, 4, &region).unwrap();
        assert_eq!(data.len(), 16);
        for i in 0..data.len() {
            assert_eq!(data.x(i), &[2.5; 4]);
            assert_eq!(data.ys()[i], 2.5);
        }
    }

    #[test]
    fn three_by_three_center_only() {
        let region = LatticeRegion::new(vec![3, 3]).unwrap();
        let field = ScalarField::from_fn(region.clone(), |s| {
            (10 * s.coords()[0] + s.coords()[1]) as f64
        });
        let data = build_associated_process(&field, 8, &region).unwrap();
        assert_eq!(data.len(), 1);
        assert_eq!(data.sites().unwrap()[0], site(&[2, 2]));
        assert_eq!(data.x(0), &[12.0, 21.0, 23.0, 32.0, 11.0, 13.0, 31.0, 33.0]);
        assert_eq!(data.ys()[0], 22.0);
    }

    #[test]
    fn all_vicinities_leave_region() {
        let region = LatticeRegion::new(vec![2, 2]).unwrap();
        let field = ScalarField::from_fn(region.clone(), |_| 1.0);
        assert!(matches!(
            build_associated_process(&field, 3, &region),
            Err(Error::EmptyDataset)
        ));
    }

    #[test]
    fn center_small_example() {
        let data = RegressionDataset::from_rows(&[(vec![1.0, 1.0], 0.0), (vec![3.0, 3.0], 5.0)]).unwrap();
        let (c, mean) = center_dataset(&data).unwrap();
        assert_eq!(mean, vec![2.0, 2.0]);
        assert_eq!(c.x(0), &[-1.0, -1.0]);
        assert_eq!(c.x(1), &[1.0, 1.0]);
        assert_eq!(c.ys(), data.ys());
    }

    #[test]
    fn center_needs_two_samples() {
        let data = RegressionDataset::from_rows(&[(vec![1.0], 0.0)]).unwrap();
        assert!(matches!(center_dataset(&data), Err(Error::DegenerateDataset(_))));
    }

    #[test]
    fn dataset_shape_validation() {
        assert!(RegressionDataset::new(2, vec![1.0; 5], vec![0.0; 2]).is_err());
        assert!(RegressionDataset::new(0, vec![], vec![]).is_err());
        assert!(matches!(RegressionDataset::new(1, vec![], vec![]), Err(Error::EmptyDataset)));
    }
}
