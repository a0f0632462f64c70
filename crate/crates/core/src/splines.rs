//! Univariate B-spline and NURBS bases: Cox–de Boor evaluation, first
//! derivatives, knot insertion and uniform h-refinement.

use serde::{Deserialize, Serialize};

use crate::error::{IgaError, Result};

/// Clamped knot vector on `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnotVector {
    knots: Vec<f64>,
    degree: usize,
}

impl KnotVector {
    pub fn new(knots: Vec<f64>, degree: usize) -> Result<Self> {
        let p = degree;
        if knots.len() < 2 * (p + 1) {
            return Err(IgaError::KnotVector(format!("{} knots are too few for degree {p}", knots.len())));
        }
        if knots.iter().any(|k| !k.is_finite() || *k < 0.0 || *k > 1.0) {
            return Err(IgaError::KnotVector("knots must lie in [0, 1]".into()));
        }
        if knots.windows(2).any(|w| w[1] < w[0]) {
            return Err(IgaError::KnotVector("knots must be non-decreasing".into()));
        }
        let first = knots[0];
        let last = knots[knots.len() - 1];
        if !(first < last) {
            return Err(IgaError::KnotVector("knot range is empty".into()));
        }
        let m = knots.len();
        if knots[..=p].iter().any(|k| *k != first) || knots[m - p - 1..].iter().any(|k| *k != last) {
            return Err(IgaError::KnotVector(format!("end knots must have multiplicity {}", p + 1)));
        }
        let kv = KnotVector { knots, degree };
        for (value, mult) in kv.interior_multiplicities() {
            if mult > p {
                return Err(IgaError::KnotVector(format!("interior knot {value} has multiplicity {mult} > {p}")));
            }
        }
        Ok(kv)
    }

    /// Open uniform knot vector with `elements` equal spans on `[0, 1]`.
    pub fn open_uniform(degree: usize, elements: usize) -> Result<Self> {
        if elements == 0 {
            return Err(IgaError::KnotVector("need at least one element".into()));
        }
        let mut knots = vec![0.0; degree + 1];
        knots.extend((1..elements).map(|e| e as f64 / elements as f64));
        knots.extend(std::iter::repeat(1.0).take(degree + 1));
        KnotVector::new(knots, degree)
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Number of basis functions.
    pub fn len(&self) -> usize {
        self.knots.len() - self.degree - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn first(&self) -> f64 {
        self.knots[0]
    }

    pub fn last(&self) -> f64 {
        self.knots[self.knots.len() - 1]
    }

    /// Distinct knot values in increasing order.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for &k in &self.knots {
            if out.last() != Some(&k) {
                out.push(k);
            }
        }
        out
    }

    fn interior_multiplicities(&self) -> Vec<(f64, usize)> {
        let mut out: Vec<(f64, usize)> = Vec::new();
        for &k in &self.knots {
            if k == self.first() || k == self.last() {
                continue;
            }
            match out.last_mut() {
                Some((v, m)) if *v == k => *m += 1,
                _ => out.push((k, 1)),
            }
        }
        out
    }

    pub fn multiplicity(&self, xi: f64) -> usize {
        self.knots.iter().filter(|k| **k == xi).count()
    }

    /// Index `i` with `knots[i] <= xi < knots[i+1]`; the right end maps to the
    /// last nonempty span.
    pub fn find_span(&self, xi: f64) -> Result<usize> {
        let (lo, hi) = (self.first(), self.last());
        if !(xi >= lo && xi <= hi) {
            return Err(IgaError::Domain { xi, lo, hi });
        }
        let n = self.len();
        let p = self.degree;
        if xi >= self.knots[n] {
            let mut i = n - 1;
            while self.knots[i] == self.knots[i + 1] {
                i -= 1;
            }
            return Ok(i);
        }
        // knots[p] <= xi < knots[n]
        let (mut low, mut high) = (p, n);
        while high - low > 1 {
            let mid = (low + high) / 2;
            if xi < self.knots[mid] {
                high = mid;
            } else {
                low = mid;
            }
        }
        Ok(low)
    }

    /// Greville abscissae (knot averages), one per basis function.
    pub fn greville(&self) -> Vec<f64> {
        let p = self.degree;
        if p == 0 {
            return (0..self.len()).map(|i| 0.5 * (self.knots[i] + self.knots[i + 1])).collect();
        }
        (0..self.len()).map(|i| self.knots[i + 1..=i + p].iter().sum::<f64>() / p as f64).collect()
    }
}

/// Nonzero basis values and first derivatives at one parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct BasisEval {
    pub span: usize,
    pub values: Vec<f64>,
    pub derivs: Vec<f64>,
}

impl BasisEval {
    /// Global index of the first nonzero function.
    pub fn first_index(&self) -> usize {
        self.span + 1 - self.values.len()
    }
}

/// B-spline values and first derivatives by the Cox–de Boor triangle, with
/// 0/0 taken as 0.
fn bspline_ders(kv: &KnotVector, span: usize, xi: f64) -> (Vec<f64>, Vec<f64>) {
    let p = kv.degree;
    let u = &kv.knots;
    // ndu[j][r]: upper triangle holds basis values, lower triangle knot differences
    let mut ndu = vec![vec![0.0; p + 1]; p + 1];
    let mut left = vec![0.0; p + 1];
    let mut right = vec![0.0; p + 1];
    ndu[0][0] = 1.0;
    for j in 1..=p {
        left[j] = xi - u[span + 1 - j];
        right[j] = u[span + j] - xi;
        let mut saved = 0.0;
        for r in 0..j {
            ndu[j][r] = right[r + 1] + left[j - r];
            let temp = if ndu[j][r] != 0.0 { ndu[r][j - 1] / ndu[j][r] } else { 0.0 };
            ndu[r][j] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu[j][j] = saved;
    }
    let values: Vec<f64> = (0..=p).map(|j| ndu[j][p]).collect();
    let mut derivs = vec![0.0; p + 1];
    if p > 0 {
        for r in 0..=p {
            // first derivative: p * (N_{r-1,p-1}/(u_{r+p}-u_r) - N_{r,p-1}/(u_{r+p+1}-u_{r+1}))
            let mut d = 0.0;
            if r >= 1 {
                let den = ndu[p][r - 1];
                if den != 0.0 {
                    d += ndu[r - 1][p - 1] / den;
                }
            }
            if r < p {
                let den = ndu[p][r];
                if den != 0.0 {
                    d -= ndu[r][p - 1] / den;
                }
            }
            derivs[r] = p as f64 * d;
        }
    }
    (values, derivs)
}

/// A univariate basis: B-spline, or NURBS when weights are present.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Basis1D {
    pub knot_vector: KnotVector,
    pub weights: Option<Vec<f64>>,
}

impl Basis1D {
    pub fn bspline(knot_vector: KnotVector) -> Self {
        Basis1D { knot_vector, weights: None }
    }

    pub fn nurbs(knot_vector: KnotVector, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != knot_vector.len() {
            return Err(IgaError::KnotVector(format!(
                "{} weights for {} basis functions",
                weights.len(),
                knot_vector.len()
            )));
        }
        if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(IgaError::KnotVector("weights must be strictly positive".into()));
        }
        Ok(Basis1D { knot_vector, weights: Some(weights) })
    }

    pub fn degree(&self) -> usize {
        self.knot_vector.degree()
    }

    pub fn len(&self) -> usize {
        self.knot_vector.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights.as_ref().map_or(1.0, |w| w[i])
    }

    pub fn eval(&self, xi: f64) -> Result<BasisEval> {
        eval_basis(self, xi)
    }

    /// Dense `n × points` tables of values and derivatives.
    pub fn tabulate(&self, points: &[f64]) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        let n = self.len();
        let mut vals = vec![vec![0.0; points.len()]; n];
        let mut ders = vec![vec![0.0; points.len()]; n];
        for (q, &xi) in points.iter().enumerate() {
            let e = self.eval(xi)?;
            let first = e.first_index();
            for (k, (v, d)) in e.values.iter().zip(&e.derivs).enumerate() {
                vals[first + k][q] = *v;
                ders[first + k][q] = *d;
            }
        }
        Ok((vals, ders))
    }
}

pub fn find_span(kv: &KnotVector, xi: f64) -> Result<usize> {
    kv.find_span(xi)
}

pub fn eval_basis(basis: &Basis1D, xi: f64) -> Result<BasisEval> {
    let kv = &basis.knot_vector;
    let span = kv.find_span(xi)?;
    let (mut values, mut derivs) = bspline_ders(kv, span, xi);
    if let Some(w) = &basis.weights {
        let first = span - kv.degree();
        let mut wsum = 0.0;
        let mut dwsum = 0.0;
        for (k, (v, d)) in values.iter().zip(&derivs).enumerate() {
            wsum += v * w[first + k];
            dwsum += d * w[first + k];
        }
        for k in 0..values.len() {
            let wk = w[first + k];
            let r = values[k] * wk / wsum;
            derivs[k] = (derivs[k] * wk - r * dwsum) / wsum;
            values[k] = r;
        }
    }
    Ok(BasisEval { span, values, derivs })
}

/// Inserts `xi_new` once into a basis with homogeneous control points
/// (`[w·x.., w]` for rational bases, plain coordinates otherwise).
pub(crate) fn insert_knot_raw(kv: &KnotVector, pts: &[Vec<f64>], xi_new: f64) -> Result<(KnotVector, Vec<Vec<f64>>)> {
    let p = kv.degree();
    if !(xi_new > kv.first() && xi_new < kv.last()) {
        return Err(IgaError::Refinement(format!("knot {xi_new} is not strictly inside the knot range")));
    }
    let s = kv.multiplicity(xi_new);
    if s + 1 > p {
        return Err(IgaError::Refinement(format!(
            "inserting {xi_new} would raise its multiplicity to {} > degree {p}",
            s + 1
        )));
    }
    if pts.len() != kv.len() {
        return Err(IgaError::Refinement(format!("{} control points for {} basis functions", pts.len(), kv.len())));
    }
    let u = kv.knots();
    let k = kv.find_span(xi_new)?;
    let mut out = Vec::with_capacity(pts.len() + 1);
    for i in 0..=pts.len() {
        if i + p <= k {
            out.push(pts[i].clone());
        } else if i > k - s {
            out.push(pts[i - 1].clone());
        } else {
            let alpha = (xi_new - u[i]) / (u[i + p] - u[i]);
            out.push(pts[i].iter().zip(&pts[i - 1]).map(|(a, b)| alpha * a + (1.0 - alpha) * b).collect());
        }
    }
    let mut knots = u.to_vec();
    knots.insert(k + 1, xi_new);
    Ok((KnotVector::new(knots, p)?, out))
}

fn to_homogeneous(basis: &Basis1D, controls: &[Vec<f64>]) -> Vec<Vec<f64>> {
    controls
        .iter()
        .enumerate()
        .map(|(i, c)| match &basis.weights {
            Some(w) => {
                let mut h: Vec<f64> = c.iter().map(|x| x * w[i]).collect();
                h.push(w[i]);
                h
            }
            None => c.clone(),
        })
        .collect()
}

fn from_homogeneous(kv: KnotVector, rational: bool, pts: Vec<Vec<f64>>) -> Result<(Basis1D, Vec<Vec<f64>>)> {
    if !rational {
        return Ok((Basis1D::bspline(kv), pts));
    }
    let mut weights = Vec::with_capacity(pts.len());
    let mut ctrl = Vec::with_capacity(pts.len());
    for h in pts {
        let (w, rest) = h.split_last().expect("homogeneous point");
        weights.push(*w);
        ctrl.push(rest.iter().map(|x| x / w).collect());
    }
    Ok((Basis1D::nurbs(kv, weights)?, ctrl))
}

/// Curve-preserving insertion of one knot; control points may have any dimension.
pub fn insert_knot(basis: &Basis1D, controls: &[Vec<f64>], xi_new: f64) -> Result<(Basis1D, Vec<Vec<f64>>)> {
    let h = to_homogeneous(basis, controls);
    let (kv, pts) = insert_knot_raw(&basis.knot_vector, &h, xi_new)?;
    from_homogeneous(kv, basis.weights.is_some(), pts)
}

/// Inserts the midpoint of every nonempty span, `levels` times.
pub fn h_refine_uniform(basis: &Basis1D, controls: &[Vec<f64>], levels: usize) -> Result<(Basis1D, Vec<Vec<f64>>)> {
    let rational = basis.weights.is_some();
    let mut kv = basis.knot_vector.clone();
    let mut pts = to_homogeneous(basis, controls);
    for _ in 0..levels {
        let mids: Vec<f64> = kv.breakpoints().windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        for m in mids {
            let (k2, p2) = insert_knot_raw(&kv, &pts, m)?;
            kv = k2;
            pts = p2;
        }
    }
    from_homogeneous(kv, rational, pts)
}

/// Evaluates a curve `sum_i R_i(xi) P_i`.
pub fn eval_curve(basis: &Basis1D, controls: &[Vec<f64>], xi: f64) -> Result<Vec<f64>> {
    let e = basis.eval(xi)?;
    let first = e.first_index();
    let dim = controls.first().map_or(0, Vec::len);
    let mut out = vec![0.0; dim];
    for (k, v) in e.values.iter().enumerate() {
        for (o, c) in out.iter_mut().zip(&controls[first + k]) {
            *o += v * c;
        }
    }
    Ok(out)
}

/// Knot vector and weights of the nine-point quadratic NURBS circle.
pub fn circle_basis() -> Basis1D {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let kv = KnotVector::new(vec![0.0, 0.0, 0.0, 0.25, 0.25, 0.5, 0.5, 0.75, 0.75, 1.0, 1.0, 1.0], 2).expect("circle knots");
    Basis1D::nurbs(kv, vec![1.0, h, 1.0, h, 1.0, h, 1.0, h, 1.0]).expect("circle weights")
}

/// Control points of the unit circle matching [`circle_basis`].
pub fn circle_controls() -> Vec<Vec<f64>> {
    [(1.0, 0.0), (1.0, 1.0), (0.0, 1.0), (-1.0, 1.0), (-1.0, 0.0), (-1.0, -1.0), (0.0, -1.0), (1.0, -1.0), (1.0, 0.0)]
        .iter()
        .map(|&(x, y)| vec![x, y])
        .collect()
}
