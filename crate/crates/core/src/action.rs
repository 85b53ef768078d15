//! Closed-form maximizers of `g . b` over norm balls, box clipping, tangent-cone
//! projection and the discrete action-update rules built from them.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{check_dim, Error, Result};

/// Exponent `p` of an `l_p` norm, `1 <= p <= inf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormIndex {
    Finite(f64),
    Infinity,
}

impl NormIndex {
    pub const ONE: NormIndex = NormIndex::Finite(1.0);
    pub const TWO: NormIndex = NormIndex::Finite(2.0);
    pub const INF: NormIndex = NormIndex::Infinity;

    pub fn new(p: f64) -> Result<Self> {
        if p.is_nan() || p < 1.0 {
            return Err(Error::invalid(format!("norm exponent must be >= 1, got {p}")));
        }
        Ok(if p.is_infinite() { NormIndex::Infinity } else { NormIndex::Finite(p) })
    }

    /// `p` as a float, `f64::INFINITY` for the max norm.
    pub fn value(self) -> f64 {
        match self {
            NormIndex::Finite(p) => p,
            NormIndex::Infinity => f64::INFINITY,
        }
    }

    pub fn is_one(self) -> bool {
        self == NormIndex::Finite(1.0)
    }

    pub fn is_infinite(self) -> bool {
        self == NormIndex::Infinity
    }

    /// Hölder conjugate `q` with `1/p + 1/q = 1`.
    pub fn dual(self) -> NormIndex {
        match self {
            NormIndex::Infinity => NormIndex::Finite(1.0),
            NormIndex::Finite(1.0) => NormIndex::Infinity,
            NormIndex::Finite(p) => NormIndex::Finite(p / (p - 1.0)),
        }
    }

    pub fn norm(self, v: &[f64]) -> f64 {
        lp_norm(v, self)
    }
}

pub fn dual_exponent(p: f64) -> Result<NormIndex> {
    Ok(NormIndex::new(p)?.dual())
}

impl PartialOrd for NormIndex {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        self.value().partial_cmp(&other.value())
    }
}

impl fmt::Display for NormIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormIndex::Finite(p) => write!(f, "{p}"),
            NormIndex::Infinity => f.write_str("inf"),
        }
    }
}

impl FromStr for NormIndex {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        if matches!(t.as_str(), "inf" | "infinity" | "∞") {
            return Ok(NormIndex::Infinity);
        }
        let p: f64 = t.parse().map_err(|_| Error::Parse(format!("bad norm exponent {s:?}")))?;
        NormIndex::new(p)
    }
}

impl Serialize for NormIndex {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            NormIndex::Finite(p) => s.serialize_f64(*p),
            NormIndex::Infinity => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for NormIndex {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        let parsed = match Raw::deserialize(d)? {
            Raw::Num(p) => NormIndex::new(p),
            Raw::Text(s) => s.parse(),
        };
        parsed.map_err(serde::de::Error::custom)
    }
}

pub fn lp_norm(v: &[f64], p: NormIndex) -> f64 {
    let max = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    match p {
        NormIndex::Infinity => max,
        NormIndex::Finite(1.0) => v.iter().map(|x| x.abs()).sum(),
        NormIndex::Finite(2.0) => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
        NormIndex::Finite(p) => {
            if max == 0.0 {
                return 0.0;
            }
            max * v.iter().map(|x| (x.abs() / max).powf(p)).sum::<f64>().powf(1.0 / p)
        }
    }
}

/// Maximizer of `g . b` subject to `|b|_p <= L`; the maximum equals `L |g|_q`.
///
/// `p = 1` puts all mass on the largest `|g_i|` (lowest index on ties), `p = inf`
/// takes `L sign(g_i)` per coordinate, and `g = 0` yields `b = 0`.
pub fn hamiltonian_maximizer(g: &[f64], lip: f64, p: NormIndex) -> Result<Vec<f64>> {
    let mut b = vec![0.0; g.len()];
    hamiltonian_maximizer_into(g, lip, p, &mut b)?;
    Ok(b)
}

pub fn hamiltonian_maximizer_into(g: &[f64], lip: f64, p: NormIndex, out: &mut [f64]) -> Result<()> {
    check_dim(g.len(), out.len())?;
    if !(lip >= 0.0) || !lip.is_finite() {
        return Err(Error::invalid(format!("Lipschitz bound must be finite and >= 0, got {lip}")));
    }
    if g.iter().any(|x| !x.is_finite()) {
        return Err(Error::numerical("non-finite action gradient"));
    }
    out.fill(0.0);
    let gmax = g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if gmax == 0.0 || lip == 0.0 {
        return Ok(());
    }
    match p {
        NormIndex::Infinity => {
            for (o, &gi) in out.iter_mut().zip(g) {
                *o = if gi > 0.0 { lip } else if gi < 0.0 { -lip } else { 0.0 };
            }
        }
        NormIndex::Finite(1.0) => {
            let j = g.iter().position(|x| x.abs() == gmax).expect("gmax attained");
            out[j] = lip * g[j].signum();
        }
        NormIndex::Finite(_) => {
            let q = p.dual().value();
            // Work with g / max|g| so |g_i|^(q-1) cannot overflow for p near 1.
            let norm_q = g.iter().map(|x| (x.abs() / gmax).powf(q)).sum::<f64>().powf(1.0 / q);
            let denom = norm_q.powf(q - 1.0);
            for (o, &gi) in out.iter_mut().zip(g) {
                *o = lip * gi.signum() * (gi.abs() / gmax).powf(q - 1.0) / denom;
            }
        }
    }
    Ok(())
}

/// Axis-aligned box `lo <= a <= hi` with an activity tolerance `tau` for its faces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxConstraint {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    #[serde(default = "default_tau")]
    pub tau: f64,
}

fn default_tau() -> f64 {
    1e-9
}

impl BoxConstraint {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, tau: f64) -> Result<Self> {
        let b = Self { lo, hi, tau };
        b.validate()?;
        Ok(b)
    }

    /// The cube `[-half_width, half_width]^m`.
    pub fn cube(m: usize, half_width: f64, tau: f64) -> Result<Self> {
        Self::new(vec![-half_width; m], vec![half_width; m], tau)
    }

    pub fn validate(&self) -> Result<()> {
        check_dim(self.lo.len(), self.hi.len())?;
        if self.lo.is_empty() {
            return Err(Error::invalid("box must have at least one coordinate"));
        }
        let mut min_gap = f64::INFINITY;
        for (l, h) in self.lo.iter().zip(&self.hi) {
            if !(l.is_finite() && h.is_finite() && l < h) {
                return Err(Error::invalid(format!("box needs lo < hi, got [{l}, {h}]")));
            }
            min_gap = min_gap.min(h - l);
        }
        if !(self.tau >= 0.0 && self.tau < 0.5 * min_gap) {
            return Err(Error::invalid(format!("boundary tolerance {} out of range", self.tau)));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, a: &[f64], slack: f64) -> bool {
        a.iter().zip(self.lo.iter().zip(&self.hi)).all(|(&x, (&l, &h))| x >= l - slack && x <= h + slack)
    }
}

pub fn clip_box(a: &[f64], bx: &BoxConstraint) -> Result<Vec<f64>> {
    check_dim(bx.dim(), a.len())?;
    Ok(a.iter().zip(bx.lo.iter().zip(&bx.hi)).map(|(&x, (&l, &h))| x.max(l).min(h)).collect())
}

pub(crate) fn clip_in_place(a: &mut [f64], bx: &BoxConstraint) {
    for (x, (&l, &h)) in a.iter_mut().zip(bx.lo.iter().zip(&bx.hi)) {
        *x = x.max(l).min(h);
    }
}

/// Euclidean projection of `v` onto the tangent cone of the box at `a`.
pub fn tangent_cone_project(v: &[f64], a: &[f64], bx: &BoxConstraint) -> Result<Vec<f64>> {
    check_dim(bx.dim(), v.len())?;
    check_dim(bx.dim(), a.len())?;
    if !bx.contains(a, bx.tau) {
        return Err(Error::invalid("action lies outside the box beyond the boundary tolerance"));
    }
    let mut out = v.to_vec();
    cone_project_in_place(&mut out, a, bx);
    Ok(out)
}

pub(crate) fn cone_project_in_place(v: &mut [f64], a: &[f64], bx: &BoxConstraint) {
    for i in 0..v.len() {
        if a[i] >= bx.hi[i] - bx.tau {
            v[i] = v[i].min(0.0);
        } else if a[i] <= bx.lo[i] + bx.tau {
            v[i] = v[i].max(0.0);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionMode {
    /// Maximize over `[-L, L]^m` intersected with the tangent cone.
    BoxCap,
    /// Maximize over the Euclidean ball of radius `L` intersected with the tangent cone.
    L2Cap,
}

impl FromStr for DirectionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "box_cap" => Ok(DirectionMode::BoxCap),
            "l2_cap" => Ok(DirectionMode::L2Cap),
            other => Err(Error::invalid(format!("unknown direction mode {other:?}"))),
        }
    }
}

pub fn constrained_direction(
    g: &[f64],
    a: &[f64],
    bx: &BoxConstraint,
    lip: f64,
    mode: DirectionMode,
) -> Result<Vec<f64>> {
    check_dim(bx.dim(), g.len())?;
    match mode {
        DirectionMode::BoxCap => {
            let b = hamiltonian_maximizer(g, lip, NormIndex::INF)?;
            tangent_cone_project(&b, a, bx)
        }
        DirectionMode::L2Cap => {
            // For a polyhedral cone, the maximizer of g.b on cone ∩ ball is along P_T(g).
            let pg = tangent_cone_project(g, a, bx)?;
            let n = lp_norm(&pg, NormIndex::TWO);
            if n == 0.0 {
                return Ok(vec![0.0; g.len()]);
            }
            Ok(pg.iter().map(|x| lip * x / n).collect())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepMode {
    /// `a + h b*` with `b*` the unconstrained `l_p` maximizer.
    Free,
    /// `clip(a + h L g/|g|_2)`.
    EulerClip,
    /// `a + h P_T(a)(L g/|g|_2)`.
    EulerCone,
}

impl FromStr for StepMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "free" => Ok(StepMode::Free),
            "euler_clip" => Ok(StepMode::EulerClip),
            "euler_cone" => Ok(StepMode::EulerCone),
            other => Err(Error::invalid(format!("unknown step mode {other:?}"))),
        }
    }
}

pub fn step_action(
    a: &[f64],
    g: &[f64],
    lip: f64,
    p: NormIndex,
    h: f64,
    mode: StepMode,
    bx: Option<&BoxConstraint>,
) -> Result<Vec<f64>> {
    check_dim(a.len(), g.len())?;
    if !(h >= 0.0) {
        return Err(Error::invalid(format!("time step must be >= 0, got {h}")));
    }
    let need_box = || bx.ok_or_else(|| Error::invalid(format!("step mode {mode:?} requires an action box")));
    match mode {
        StepMode::Free => {
            let b = hamiltonian_maximizer(g, lip, p)?;
            Ok(a.iter().zip(&b).map(|(x, d)| x + h * d).collect())
        }
        StepMode::EulerClip => {
            let bx = need_box()?;
            let b = hamiltonian_maximizer(g, lip, NormIndex::TWO)?;
            let moved: Vec<f64> = a.iter().zip(&b).map(|(x, d)| x + h * d).collect();
            clip_box(&moved, bx)
        }
        StepMode::EulerCone => {
            let bx = need_box()?;
            let v = hamiltonian_maximizer(g, lip, NormIndex::TWO)?;
            let d = tangent_cone_project(&v, a, bx)?;
            Ok(a.iter().zip(&d).map(|(x, d)| x + h * d).collect())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn dual_exponents() {
        assert_eq!(dual_exponent(2.0).unwrap(), NormIndex::TWO);
        assert_eq!(dual_exponent(1.0).unwrap(), NormIndex::INF);
        assert_eq!(NormIndex::INF.dual(), NormIndex::ONE);
        assert!((dual_exponent(3.0).unwrap().value() - 1.5).abs() < 1e-15);
        assert!(dual_exponent(0.5).is_err());
        assert!(dual_exponent(f64::NAN).is_err());
        for p in [1.0, 1.25, 2.0, 3.0, 7.5, f64::INFINITY] {
            let n = NormIndex::new(p).unwrap();
            let back = n.dual().dual();
            assert!((back.value() - p).abs() < 1e-12 || back == n);
        }
    }

    #[test]
    fn norm_index_parsing() {
        assert_eq!("inf".parse::<NormIndex>().unwrap(), NormIndex::INF);
        assert_eq!("2".parse::<NormIndex>().unwrap(), NormIndex::TWO);
        assert!("0.3".parse::<NormIndex>().is_err());
        let v: Vec<NormIndex> = serde_json::from_str(r#"[1, 2.5, "inf"]"#).unwrap();
        assert_eq!(v, vec![NormIndex::ONE, NormIndex::Finite(2.5), NormIndex::INF]);
        assert_eq!(serde_json::to_string(&v).unwrap(), r#"[1.0,2.5,"inf"]"#);
    }

    #[test]
    fn maximizer_examples() {
        let b = hamiltonian_maximizer(&[3.0, 4.0], 1.0, NormIndex::TWO).unwrap();
        assert!(close(&b, &[0.6, 0.8], 1e-15));
        let b = hamiltonian_maximizer(&[3.0, 4.0], 2.0, NormIndex::ONE).unwrap();
        assert_eq!(b, vec![0.0, 2.0]);
        let b = hamiltonian_maximizer(&[3.0, -4.0], 2.0, NormIndex::INF).unwrap();
        assert_eq!(b, vec![2.0, -2.0]);
        let b = hamiltonian_maximizer(&[1.0, 1.0], 1.0, NormIndex::Finite(3.0)).unwrap();
        assert!(close(&b, &[0.79370, 0.79370], 1e-5));
        assert!((lp_norm(&b, NormIndex::Finite(3.0)) - 1.0).abs() < 1e-12);
        assert!((b[0] + b[1] - 2f64.powf(2.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn maximizer_ties_and_zero() {
        let b = hamiltonian_maximizer(&[-2.0, 2.0, 1.0], 1.5, NormIndex::ONE).unwrap();
        assert_eq!(b, vec![-1.5, 0.0, 0.0]);
        for p in [NormIndex::ONE, NormIndex::TWO, NormIndex::Finite(4.0), NormIndex::INF] {
            assert_eq!(hamiltonian_maximizer(&[0.0, 0.0], 3.0, p).unwrap(), vec![0.0, 0.0]);
        }
        assert!(hamiltonian_maximizer(&[1.0], -1.0, NormIndex::TWO).is_err());
    }

    #[test]
    fn maximizer_beats_sampled_sphere() {
        // Oracle: brute-force max of g.b over 1e5 points on the l3 unit sphere.
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let p = NormIndex::Finite(3.0);
        let g = [1.0, 1.0];
        let mut best = f64::NEG_INFINITY;
        for _ in 0..100_000 {
            let u = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let n = lp_norm(&u, p);
            if n == 0.0 {
                continue;
            }
            best = best.max((g[0] * u[0] + g[1] * u[1]) / n);
        }
        let b = hamiltonian_maximizer(&g, 1.0, p).unwrap();
        let val = g[0] * b[0] + g[1] * b[1];
        assert!(val >= best - 1e-6);
        assert!((best - 2f64.powf(2.0 / 3.0)).abs() < 1e-4);
    }

    #[test]
    fn maximizer_handles_p_near_one() {
        let b = hamiltonian_maximizer(&[1e3, 2e3], 1.0, NormIndex::Finite(1.0 + 1e-9)).unwrap();
        assert!(b.iter().all(|x| x.is_finite()));
        assert!((b[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn clipping_examples() {
        let bx = BoxConstraint::cube(2, 1.0, 1e-9).unwrap();
        assert_eq!(clip_box(&[1.5, 0.2], &bx).unwrap(), vec![1.0, 0.2]);
        assert_eq!(clip_box(&[0.3, -0.7], &bx).unwrap(), vec![0.3, -0.7]);
        assert_eq!(clip_box(&[-5.0, -5.0], &bx).unwrap(), vec![-1.0, -1.0]);
    }

    #[test]
    fn clipping_matches_sampled_projection() {
        let bx = BoxConstraint::cube(2, 1.0, 0.0).unwrap();
        let a: [f64; 2] = [-5.0, -5.0];
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut best = (f64::INFINITY, [0.0, 0.0]);
        for _ in 0..1_000_000 {
            let c: [f64; 2] = [rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0)];
            let d = (a[0] - c[0]).hypot(a[1] - c[1]);
            if d < best.0 {
                best = (d, c);
            }
        }
        let clipped = clip_box(&a, &bx).unwrap();
        assert!(close(&clipped, &best.1, 5e-3));
        let dc = (a[0] - clipped[0]).hypot(a[1] - clipped[1]);
        assert!(dc <= best.0 + 1e-12);
    }

    #[test]
    fn box_validation() {
        assert!(BoxConstraint::new(vec![0.0], vec![0.0], 0.0).is_err());
        assert!(BoxConstraint::new(vec![0.0], vec![1.0], 0.6).is_err());
        assert!(BoxConstraint::new(vec![0.0, 1.0], vec![1.0], 0.0).is_err());
    }

    #[test]
    fn cone_projection_examples() {
        let bx = BoxConstraint::cube(2, 1.0, 1e-9).unwrap();
        assert_eq!(tangent_cone_project(&[2.0, 3.0], &[0.0, 0.5], &bx).unwrap(), vec![2.0, 3.0]);
        assert_eq!(tangent_cone_project(&[2.0, 3.0], &[1.0, 0.0], &bx).unwrap(), vec![0.0, 3.0]);
        assert_eq!(tangent_cone_project(&[2.0, -3.0], &[1.0, -1.0], &bx).unwrap(), vec![0.0, 0.0]);
        assert!(tangent_cone_project(&[1.0, 1.0], &[1.1, 0.0], &bx).is_err());
    }

    #[test]
    fn constrained_direction_examples() {
        let bx = BoxConstraint::cube(2, 1.0, 1e-9).unwrap();
        let d = constrained_direction(&[1.0, -2.0], &[0.0, 0.0], &bx, 3.0, DirectionMode::BoxCap).unwrap();
        assert_eq!(d, vec![3.0, -3.0]);
        let d = constrained_direction(&[1.0, -2.0], &[1.0, 1.0], &bx, 3.0, DirectionMode::BoxCap).unwrap();
        assert_eq!(d, vec![0.0, -3.0]);
        let d = constrained_direction(&[3.0, 4.0], &[0.0, 0.0], &bx, 1.0, DirectionMode::L2Cap).unwrap();
        assert!(close(&d, &[0.6, 0.8], 1e-15));
        let d = constrained_direction(&[3.0, 4.0], &[1.0, 1.0], &bx, 1.0, DirectionMode::L2Cap).unwrap();
        assert_eq!(d, vec![0.0, 0.0]);
        let d = constrained_direction(&[3.0, 4.0], &[1.0, 0.0], &bx, 2.0, DirectionMode::L2Cap).unwrap();
        assert_eq!(d, vec![0.0, 2.0]);
        assert!("sideways".parse::<DirectionMode>().is_err());
    }

    #[test]
    fn step_modes() {
        let bx = BoxConstraint::cube(2, 1.0, 1e-9).unwrap();
        let a = [0.1, -0.2];
        let g = [3.0, 4.0];
        let clip = step_action(&a, &g, 1.0, NormIndex::TWO, 0.1, StepMode::EulerClip, Some(&bx)).unwrap();
        let cone = step_action(&a, &g, 1.0, NormIndex::TWO, 0.1, StepMode::EulerCone, Some(&bx)).unwrap();
        assert!(close(&clip, &cone, 1e-12));
        assert!(close(&clip, &[0.16, -0.12], 1e-12));

        let corner = [1.0, 1.0];
        let g = [1.0, 2.0];
        let cone = step_action(&corner, &g, 5.0, NormIndex::TWO, 0.1, StepMode::EulerCone, Some(&bx)).unwrap();
        assert_eq!(cone, corner.to_vec());
        let clip = step_action(&corner, &g, 5.0, NormIndex::TWO, 0.1, StepMode::EulerClip, Some(&bx)).unwrap();
        assert_eq!(clip, corner.to_vec());

        for mode in [StepMode::Free, StepMode::EulerClip, StepMode::EulerCone] {
            let s = step_action(&a, &[1.0, -1.0], 4.0, NormIndex::INF, 0.0, mode, Some(&bx)).unwrap();
            assert_eq!(s, a.to_vec());
        }
        assert!(step_action(&a, &g, 1.0, NormIndex::TWO, 0.1, StepMode::EulerClip, None).is_err());
        let free = step_action(&a, &[1.0, -1.0], 2.0, NormIndex::INF, 0.5, StepMode::Free, None).unwrap();
        assert!(close(&free, &[1.1, -1.2], 1e-15));
    }

    fn norm_strategy() -> impl Strategy<Value = NormIndex> {
        prop_oneof![
            Just(NormIndex::ONE),
            Just(NormIndex::INF),
            (1.01f64..8.0).prop_map(NormIndex::Finite),
        ]
    }

    proptest! {
        #[test]
        fn maximizer_is_feasible_and_attains_dual_norm(
            g in proptest::collection::vec(-10.0f64..10.0, 1..5),
            lip in 0.0f64..20.0,
            p in norm_strategy(),
        ) {
            let b = hamiltonian_maximizer(&g, lip, p).unwrap();
            prop_assert!(lp_norm(&b, p) <= lip + 1e-9);
            let val: f64 = g.iter().zip(&b).map(|(x, y)| x * y).sum();
            let expected = lip * lp_norm(&g, p.dual());
            prop_assert!((val - expected).abs() <= 1e-10 * (1.0 + expected.abs()));
        }

        #[test]
        fn maximizer_is_scale_invariant(
            g in proptest::collection::vec(-10.0f64..10.0, 1..5),
            c in 0.01f64..100.0,
            p in norm_strategy(),
        ) {
            let b1 = hamiltonian_maximizer(&g, 2.0, p).unwrap();
            let scaled: Vec<f64> = g.iter().map(|x| c * x).collect();
            let b2 = hamiltonian_maximizer(&scaled, 2.0, p).unwrap();
            prop_assert!(close(&b1, &b2, 1e-9));
        }

        #[test]
        fn clip_is_idempotent_and_nonexpansive(
            a in proptest::collection::vec(-5.0f64..5.0, 3),
            b in proptest::collection::vec(-5.0f64..5.0, 3),
        ) {
            let bx = BoxConstraint::new(vec![-1.0, 0.0, -2.0], vec![1.0, 0.5, 3.0], 0.0).unwrap();
            let ca = clip_box(&a, &bx).unwrap();
            prop_assert_eq!(clip_box(&ca, &bx).unwrap(), ca.clone());
            let cb = clip_box(&b, &bx).unwrap();
            let d_in = lp_norm(&a.iter().zip(&b).map(|(x, y)| x - y).collect::<Vec<_>>(), NormIndex::INF);
            let d_out = lp_norm(&ca.iter().zip(&cb).map(|(x, y)| x - y).collect::<Vec<_>>(), NormIndex::INF);
            prop_assert!(d_out <= d_in);
        }

        #[test]
        fn cone_projection_is_homogeneous_and_nonexpansive(
            v in proptest::collection::vec(-5.0f64..5.0, 2),
            face in 0usize..9,
            c in 0.0f64..10.0,
        ) {
            let bx = BoxConstraint::cube(2, 1.0, 1e-9).unwrap();
            let pos = [-1.0, 0.0, 1.0];
            let a = [pos[face % 3], pos[face / 3]];
            let pv = tangent_cone_project(&v, &a, &bx).unwrap();
            prop_assert!(lp_norm(&pv, NormIndex::TWO) <= lp_norm(&v, NormIndex::TWO));
            let cv: Vec<f64> = v.iter().map(|x| c * x).collect();
            let pcv = tangent_cone_project(&cv, &a, &bx).unwrap();
            prop_assert!(close(&pcv, &pv.iter().map(|x| c * x).collect::<Vec<_>>(), 1e-12));
            if face == 4 {
                prop_assert_eq!(pv, v);
            }
        }
    }
}
