//! Dimension functions, approximating functions, transfer transforms and
//! series classification.
//!
//! Dimension functions live in the closed family `f(r) = c r^s (ln 1/r)^a`
//! on `(0, r_cap]`. Pure power laws (`a = 0`) have `r_cap = +inf`; forms with a
//! logarithmic factor default to `r_cap = e^-2` so that `ln(1/r) >= 2`.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::diophantine::Partition;
use crate::{Error, Result};

/// Default cap for log-corrected forms.
pub const LOG_CAP: f64 = 0.135_335_283_236_612_7; // e^-2

const EXP_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimensionFunction {
    pub coeff: f64,
    pub power: f64,
    pub log_power: f64,
    /// Serialized as `null` when infinite.
    #[serde(with = "cap_serde")]
    pub r_cap: f64,
}

mod cap_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_some(v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

impl DimensionFunction {
    /// `c r^s (ln 1/r)^a` with the default cap.
    pub fn new(coeff: f64, power: f64, log_power: f64) -> Result<Self> {
        let cap = if log_power == 0.0 { f64::INFINITY } else { LOG_CAP };
        Self::with_cap(coeff, power, log_power, cap)
    }

    pub fn with_cap(coeff: f64, power: f64, log_power: f64, r_cap: f64) -> Result<Self> {
        let bad = |msg: String| Err(Error::DimFun(msg));
        if !(coeff.is_finite() && coeff > 0.0) {
            return bad(format!("coefficient must be positive, got {coeff}"));
        }
        if !(power.is_finite() && power >= 0.0) {
            return bad(format!("power must be non-negative, got {power}"));
        }
        if !log_power.is_finite() {
            return bad(format!("log power must be finite, got {log_power}"));
        }
        if !(r_cap > 0.0) {
            return bad(format!("r_cap must be positive, got {r_cap}"));
        }
        if log_power != 0.0 && !(r_cap < 1.0) {
            return bad("log-corrected forms need r_cap < 1".into());
        }
        if power == 0.0 && log_power >= 0.0 {
            return bad("f must vanish at 0 (need s > 0, or s = 0 with a < 0)".into());
        }
        // d/dr ln f = (s - a / ln(1/r)) / r; worst case at r = r_cap when a > 0.
        if log_power > 0.0 && power < log_power / (1.0 / r_cap).ln() {
            return bad(format!(
                "f is not monotone on (0, {r_cap}]: need s >= a / ln(1/r_cap)"
            ));
        }
        Ok(DimensionFunction {
            coeff,
            power,
            log_power,
            r_cap,
        })
    }

    /// `r^s`.
    pub fn power_law(s: f64) -> Result<Self> {
        Self::new(1.0, s, 0.0)
    }

    pub fn is_pure_power(&self) -> bool {
        self.log_power == 0.0
    }

    /// Closed-form value on `[0, r_cap]`.
    pub fn eval(&self, r: f64) -> Result<f64> {
        if !(r >= 0.0) || r > self.r_cap {
            return Err(Error::Domain {
                what: "r",
                value: r,
                domain: format!("[0, {}]", self.r_cap),
            });
        }
        Ok(self.raw(r))
    }

    /// Value with the argument clamped into `[0, r_cap]`.
    pub fn eval_saturating(&self, r: f64) -> f64 {
        if !(r > 0.0) {
            return 0.0;
        }
        self.raw(r.min(self.r_cap))
    }

    fn raw(&self, r: f64) -> f64 {
        if r == 0.0 {
            return 0.0;
        }
        let mut v = self.coeff * r.powf(self.power);
        if self.log_power != 0.0 {
            v *= (1.0 / r).ln().powf(self.log_power);
        }
        v
    }

    /// Inverse on `[0, f(r_cap)]` by bisection on the log scale.
    pub fn inverse(&self, v: f64) -> Option<f64> {
        if !(v > 0.0) {
            return Some(0.0);
        }
        if self.is_pure_power() && self.power > 0.0 {
            return Some((v / self.coeff).powf(1.0 / self.power));
        }
        let hi_cap = if self.r_cap.is_finite() { self.r_cap } else { 1e300 };
        if self.raw(hi_cap) < v {
            return None;
        }
        let (mut lo, mut hi) = (f64::MIN_POSITIVE.ln(), hi_cap.ln());
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.raw(mid.exp()) < v {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(hi.exp())
    }
}

impl fmt::Display for DimensionFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "dimfun c={} s={} a={}", self.coeff, self.power, self.log_power)
    }
}

/// Behaviour of `r^-k f(r)` as `r -> 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RatioLimit {
    Infinity,
    Finite,
    Zero,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferPair {
    pub f: DimensionFunction,
    pub g: DimensionFunction,
    pub l: usize,
    pub k: usize,
    pub m: usize,
    pub g_valid: bool,
    pub ratio_monotone: bool,
    pub ratio_limit: RatioLimit,
}

impl TransferPair {
    /// `g(r) = r^-l f(r)` together with the monotonicity of `r^-k f(r)`.
    pub fn derive(f: &DimensionFunction, l: usize, k: usize) -> Result<Self> {
        if l >= k {
            return Err(Error::Transfer(format!("need l < k, got l = {l}, k = {k}")));
        }
        let s = f.power;
        let a = f.log_power;
        let gs = s - l as f64;
        if gs < -EXP_TOL {
            return Err(Error::Transfer(format!(
                "power {s} < l = {l}: g would increase as r decreases"
            )));
        }
        if gs.abs() <= EXP_TOL && a >= 0.0 {
            return Err(Error::Transfer(format!(
                "power equals l = {l} without a decaying log factor: g does not vanish at 0"
            )));
        }
        if gs.abs() <= EXP_TOL && a < 0.0 {
            return Err(Error::Transfer(
                "power equals l with a < 0: endpoint behaviour of g is not supported".into(),
            ));
        }
        let e = s - k as f64;
        if e > EXP_TOL {
            return Err(Error::Transfer(format!(
                "power {s} > k = {k}: r^-k f(r) is not monotone decreasing"
            )));
        }
        let g = DimensionFunction::with_cap(f.coeff, gs, a, f.r_cap)
            .map_err(|err| Error::Transfer(format!("g is not a dimension function: {err}")))?;
        // r^e (ln 1/r)^a is decreasing on (0, cap] iff e <= a / ln(1/r) there.
        let (ratio_monotone, ratio_limit) = if e.abs() <= EXP_TOL {
            let lim = if a > 0.0 {
                RatioLimit::Infinity
            } else if a == 0.0 {
                RatioLimit::Finite
            } else {
                RatioLimit::Zero
            };
            (true, lim)
        } else if a >= 0.0 {
            (true, RatioLimit::Infinity)
        } else {
            let lmin = (1.0 / f.r_cap).ln();
            (e <= a / lmin, RatioLimit::Infinity)
        };
        if !ratio_monotone {
            return Err(Error::Transfer(
                "r^-k f(r) is not monotone on the domain".into(),
            ));
        }
        Ok(TransferPair {
            f: f.clone(),
            g,
            l,
            k,
            m: k - l,
            g_valid: true,
            ratio_monotone,
            ratio_limit,
        })
    }

    /// `g(x)^(1/m)`, saturating beyond the cap.
    pub fn g_root(&self, x: f64) -> f64 {
        self.g.eval_saturating(x).powf(1.0 / self.m as f64)
    }

    /// `x -> r g(x / r)^(1/m)` evaluated at `(r, x)`.
    pub fn transfer_value(&self, r: f64, x: f64) -> f64 {
        r * self.g_root(x.min(1.0) / r)
    }
}

/// Exact power-law description of a function from some index on.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TailLaw {
    pub coeff: f64,
    pub tau: f64,
    pub from: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ApproxFunction {
    Zero,
    PowerLaw { coeff: f64, tau: f64 },
    Table(BTreeMap<u64, f64>),
    Clamped { inner: Box<ApproxFunction>, cap: f64 },
    /// `q -> q g(min(inner(q), 1) / q)^(1/m)`, used when no closed form exists.
    Transferred {
        inner: Box<ApproxFunction>,
        g: DimensionFunction,
        m: usize,
    },
}

impl ApproxFunction {
    pub fn power_law(coeff: f64, tau: f64) -> Result<Self> {
        if !(coeff.is_finite() && coeff >= 0.0 && tau.is_finite()) {
            return Err(Error::Invalid(format!(
                "power law needs c >= 0 and finite tau, got c = {coeff}, tau = {tau}"
            )));
        }
        Ok(ApproxFunction::PowerLaw { coeff, tau })
    }

    pub fn table(entries: impl IntoIterator<Item = (u64, f64)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (q, v) in entries {
            if q == 0 || !(v.is_finite() && v >= 0.0) {
                return Err(Error::Invalid(format!("bad table entry ({q}, {v})")));
            }
            map.insert(q, v);
        }
        Ok(ApproxFunction::Table(map))
    }

    pub fn clamped(self, cap: f64) -> Self {
        ApproxFunction::Clamped {
            inner: Box::new(self),
            cap,
        }
    }

    pub fn eval(&self, q: u64) -> f64 {
        if q == 0 {
            return 0.0;
        }
        match self {
            ApproxFunction::Zero => 0.0,
            ApproxFunction::PowerLaw { coeff, tau } => coeff * (q as f64).powf(-tau),
            ApproxFunction::Table(t) => t.get(&q).copied().unwrap_or(0.0),
            ApproxFunction::Clamped { inner, cap } => inner.eval(q).min(*cap),
            ApproxFunction::Transferred { inner, g, m } => {
                let r = q as f64;
                r * g.eval_saturating(inner.eval(q).min(1.0) / r).powf(1.0 / *m as f64)
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            ApproxFunction::Zero => true,
            ApproxFunction::PowerLaw { coeff, .. } => *coeff == 0.0,
            ApproxFunction::Table(t) => t.values().all(|v| *v == 0.0),
            ApproxFunction::Clamped { inner, cap } => *cap == 0.0 || inner.is_zero(),
            ApproxFunction::Transferred { inner, .. } => inner.is_zero(),
        }
    }

    /// Largest value over all `q`, when it is attained at a known place.
    pub fn sup(&self) -> Option<f64> {
        match self {
            ApproxFunction::Zero => Some(0.0),
            ApproxFunction::PowerLaw { coeff, tau } => {
                if *tau >= 0.0 || *coeff == 0.0 {
                    Some(*coeff)
                } else {
                    None
                }
            }
            ApproxFunction::Table(t) => Some(t.values().cloned().fold(0.0, f64::max)),
            ApproxFunction::Clamped { inner, cap } => {
                Some(inner.sup().map_or(*cap, |s| s.min(*cap)))
            }
            ApproxFunction::Transferred { .. } => None,
        }
    }

    /// Exact power law `c q^-tau` valid for all `q >= from`, if one exists.
    pub fn tail_power_law(&self) -> Option<TailLaw> {
        match self {
            ApproxFunction::Zero => Some(TailLaw {
                coeff: 0.0,
                tau: 0.0,
                from: 1,
            }),
            ApproxFunction::PowerLaw { coeff, tau } => Some(TailLaw {
                coeff: *coeff,
                tau: *tau,
                from: 1,
            }),
            ApproxFunction::Table(t) => Some(TailLaw {
                coeff: 0.0,
                tau: 0.0,
                from: t.keys().next_back().map_or(1, |q| q + 1),
            }),
            ApproxFunction::Clamped { inner, cap } => {
                let law = inner.tail_power_law()?;
                clamp_tail(law, *cap)
            }
            ApproxFunction::Transferred { inner, g, m } => {
                if !g.is_pure_power() {
                    return None;
                }
                let law = clamp_tail(inner.tail_power_law()?, 1.0)?;
                if law.coeff == 0.0 {
                    return Some(law);
                }
                // q (c_g (c q^-tau / q)^sigma)^(1/m)
                let sm = g.power / *m as f64;
                Some(TailLaw {
                    coeff: (g.coeff * law.coeff.powf(g.power)).powf(1.0 / *m as f64),
                    tau: law.tau * sm + (sm - 1.0),
                    from: law.from,
                })
            }
        }
    }

    /// True when `psi(q) / q -> 0`.
    pub fn vanishes_relative_to_q(&self) -> bool {
        match self {
            ApproxFunction::PowerLaw { coeff, tau } => *coeff == 0.0 || *tau > -1.0,
            _ => true,
        }
    }
}

fn clamp_tail(law: TailLaw, cap: f64) -> Option<TailLaw> {
    if law.coeff == 0.0 || cap == 0.0 {
        return Some(TailLaw {
            coeff: 0.0,
            tau: 0.0,
            from: law.from,
        });
    }
    if law.tau > 0.0 {
        // c q^-tau <= cap once q >= (c / cap)^(1/tau)
        let q0 = (law.coeff / cap).powf(1.0 / law.tau).ceil().max(1.0);
        if !q0.is_finite() || q0 > 1e18 {
            return None;
        }
        Some(TailLaw {
            from: law.from.max(q0 as u64),
            ..law
        })
    } else if law.tau == 0.0 {
        Some(TailLaw {
            coeff: law.coeff.min(cap),
            ..law
        })
    } else {
        // eventually constant at the cap
        let q0 = (law.coeff / cap).powf(1.0 / law.tau).floor() + 1.0;
        if !q0.is_finite() || q0 > 1e18 {
            return None;
        }
        Some(TailLaw {
            coeff: cap,
            tau: 0.0,
            from: law.from.max(q0.max(1.0) as u64),
        })
    }
}

impl fmt::Display for ApproxFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ApproxFunction::Zero => write!(f, "zero"),
            ApproxFunction::PowerLaw { coeff, tau } => write!(f, "powerlaw c={coeff} tau={tau}"),
            ApproxFunction::Table(t) => {
                write!(f, "table")?;
                for (q, v) in t {
                    write!(f, " {q}:{v}")?;
                }
                Ok(())
            }
            ApproxFunction::Clamped { inner, cap } => write!(f, "clamped cap={cap} ({inner})"),
            ApproxFunction::Transferred { inner, g, m } => {
                write!(f, "transferred m={m} g=({g}) ({inner})")
            }
        }
    }
}

/// Integer key `(p, q)` for pointwise overrides.
pub type PairKey = (Vec<i64>, Vec<i64>);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiApproxFunction {
    pub base: ApproxFunction,
    pub mask: Option<Partition>,
    pub overrides: BTreeMap<PairKey, f64>,
}

impl MultiApproxFunction {
    pub fn new(base: ApproxFunction) -> Self {
        MultiApproxFunction {
            base,
            mask: None,
            overrides: BTreeMap::new(),
        }
    }

    pub fn with_mask(mut self, mask: Partition) -> Self {
        self.mask = Some(mask);
        self
    }

    /// `Psi(p, q)`; zero whenever the mask rejects `(q, p)`.
    pub fn eval(&self, p: &[i64], q: &[i64]) -> f64 {
        let qn = q.iter().map(|v| v.unsigned_abs()).max().unwrap_or(0);
        if qn == 0 {
            return 0.0;
        }
        if let Some(part) = &self.mask {
            let v: Vec<i64> = q.iter().chain(p.iter()).copied().collect();
            if !part.accepts(&v) {
                return 0.0;
            }
        }
        if let Some(v) = self.overrides.get(&(p.to_vec(), q.to_vec())) {
            return *v;
        }
        self.base.eval(qn)
    }
}

/// `theta(r) = r g(psi(r)/r)^(1/m)` with `psi` clamped to at most 1.
pub fn theta_transform(psi: &ApproxFunction, pair: &TransferPair) -> ApproxFunction {
    let m = pair.m as f64;
    let g = &pair.g;
    match psi {
        ApproxFunction::Zero => ApproxFunction::Zero,
        ApproxFunction::PowerLaw { coeff, tau }
            if g.is_pure_power() && *coeff <= 1.0 && *tau >= 0.0 =>
        {
            let sm = g.power / m;
            if sm == 1.0 && g.coeff == 1.0 {
                return psi.clone();
            }
            if *coeff == 0.0 {
                return ApproxFunction::Zero;
            }
            ApproxFunction::PowerLaw {
                coeff: (g.coeff * coeff.powf(g.power)).powf(1.0 / m),
                tau: tau * sm + (sm - 1.0),
            }
        }
        ApproxFunction::Table(t) => ApproxFunction::Table(
            t.iter()
                .map(|(&q, &v)| (q, pair.transfer_value(q as f64, v)))
                .collect(),
        ),
        other => ApproxFunction::Transferred {
            inner: Box::new(other.clone()),
            g: g.clone(),
            m: pair.m,
        },
    }
}

/// `Theta(p, q) = |q| g(Psi(p, q)/|q|)^(1/m)`, keeping the mask.
pub fn big_theta_transform(
    psi: &MultiApproxFunction,
    pair: &TransferPair,
) -> Result<MultiApproxFunction> {
    if !psi.base.vanishes_relative_to_q() {
        return Err(Error::Transfer(
            "sup_p Psi(p,q)/|q| does not tend to 0 (power law with tau <= -1)".into(),
        ));
    }
    let overrides = psi
        .overrides
        .iter()
        .map(|(key, &v)| {
            let qn = key.1.iter().map(|x| x.unsigned_abs()).max().unwrap_or(0) as f64;
            let t = if qn == 0.0 { 0.0 } else { pair.transfer_value(qn, v) };
            (key.clone(), t)
        })
        .collect();
    Ok(MultiApproxFunction {
        base: theta_transform(&psi.base, pair),
        mask: psi.mask.clone(),
        overrides,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Convergent,
    Divergent,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Verdict::Convergent => "Convergent",
            Verdict::Divergent => "Divergent",
            Verdict::Inconclusive => "Inconclusive",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Evidence {
    /// Terms are `C q^exponent (ln q)^log_power` (asymptotically) from `from_q` on.
    Exponent {
        exponent: f64,
        log_power: f64,
        from_q: u64,
    },
    PartialSum {
        terms: u64,
        sum: f64,
        tail_bound: Option<f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesVerdict {
    pub verdict: Verdict,
    pub evidence: Evidence,
}

/// Terms summed for partial-sum evidence.
pub const PARTIAL_TERMS: u64 = 1_000_000;

/// Classify `sum q^(n+m-1) g(psi(q)/q)` when `pair` is given, otherwise
/// `sum q^(n-1) psi(q)^m`.
pub fn classify_series(
    psi: &ApproxFunction,
    n: usize,
    m: usize,
    pair: Option<&TransferPair>,
) -> SeriesVerdict {
    let term = |q: u64| -> f64 {
        let qf = q as f64;
        let v = psi.eval(q);
        match pair {
            Some(p) => qf.powi((n + m - 1) as i32) * p.g.eval_saturating(v / qf),
            None => qf.powi(n as i32 - 1) * v.powi(m as i32),
        }
    };
    let exact = matches!(psi, ApproxFunction::Zero | ApproxFunction::PowerLaw { .. });

    let Some(law) = psi.tail_power_law() else {
        let sum = (1..=PARTIAL_TERMS).map(term).sum();
        return SeriesVerdict {
            verdict: Verdict::Inconclusive,
            evidence: Evidence::PartialSum {
                terms: PARTIAL_TERMS,
                sum,
                tail_bound: None,
            },
        };
    };

    // Asymptotic exponent of the terms and the constant in front.
    let (verdict, exponent, log_power, constant) = if law.coeff == 0.0 {
        (Verdict::Convergent, f64::NEG_INFINITY, 0.0, 0.0)
    } else {
        match pair {
            None => {
                let e = (n as f64 - 1.0) - m as f64 * law.tau;
                (p_series(e, 0.0), e, 0.0, law.coeff.powi(m as i32))
            }
            Some(p) => {
                if law.tau <= -1.0 {
                    // psi(q)/q does not tend to 0; terms are bounded below by q^(n+m-1) g(const)
                    (Verdict::Divergent, (n + m - 1) as f64, 0.0, f64::NAN)
                } else {
                    let sigma = p.g.power;
                    let e = (n + m - 1) as f64 - sigma * (law.tau + 1.0);
                    let a = p.g.log_power;
                    let c = p.g.coeff * law.coeff.powf(sigma);
                    (p_series(e, a), e, a, c)
                }
            }
        }
    };

    if exact {
        return SeriesVerdict {
            verdict,
            evidence: Evidence::Exponent {
                exponent,
                log_power,
                from_q: law.from,
            },
        };
    }

    let terms = PARTIAL_TERMS.max(law.from.saturating_sub(1));
    let sum: f64 = (1..=terms).map(term).sum();
    let tail_bound = if law.coeff == 0.0 {
        Some(0.0)
    } else if verdict == Verdict::Convergent && log_power == 0.0 && constant.is_finite() {
        let nn = terms as f64;
        Some(constant * nn.powf(exponent + 1.0) / (-exponent - 1.0))
    } else {
        None
    };
    SeriesVerdict {
        verdict,
        evidence: Evidence::PartialSum {
            terms,
            sum,
            tail_bound,
        },
    }
}

/// `sum q^e (ln q)^a`: converges iff `e < -1`, or `e = -1` and `a < -1`.
fn p_series(e: f64, a: f64) -> Verdict {
    if (e + 1.0).abs() <= EXP_TOL {
        if a < -1.0 {
            Verdict::Convergent
        } else {
            Verdict::Divergent
        }
    } else if e < -1.0 {
        Verdict::Convergent
    } else {
        Verdict::Divergent
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparison {
    /// `f / g2 -> 0` as `r -> 0`.
    FDominatesToZero,
    /// `g2 / f -> 0` as `r -> 0`.
    G2DominatesToZero,
    Comparable,
}

/// Limit of `f(r) / g2(r)` as `r -> 0`.
pub fn check_dimfun_comparison(f: &DimensionFunction, g2: &DimensionFunction) -> Comparison {
    let ds = f.power - g2.power;
    let da = f.log_power - g2.log_power;
    if ds.abs() > EXP_TOL {
        if ds > 0.0 {
            Comparison::FDominatesToZero
        } else {
            Comparison::G2DominatesToZero
        }
    } else if da.abs() > EXP_TOL {
        // ratio ~ (ln 1/r)^da
        if da < 0.0 {
            Comparison::FDominatesToZero
        } else {
            Comparison::G2DominatesToZero
        }
    } else {
        Comparison::Comparable
    }
}

/// Parse `"powerlaw c=1 tau=3"`, `"zero"`, `"table 1:0.5 2:0.25"`,
/// `"clamped cap=1 powerlaw c=2 tau=1"`.
pub fn parse_approx(spec: &str) -> Result<ApproxFunction> {
    let words: Vec<&str> = spec.split_whitespace().collect();
    parse_approx_words(&words)
}

fn parse_approx_words(words: &[&str]) -> Result<ApproxFunction> {
    let (head, rest) = words
        .split_first()
        .ok_or_else(|| Error::Parse("empty approximating-function spec".into()))?;
    match *head {
        "zero" if rest.is_empty() => Ok(ApproxFunction::Zero),
        "powerlaw" => {
            let kv = key_values(rest, &["c", "tau"])?;
            ApproxFunction::power_law(kv[0].unwrap_or(1.0), req(kv[1], "tau")?)
        }
        "table" => {
            let mut entries = Vec::new();
            for w in rest {
                let (q, v) = w
                    .split_once(':')
                    .ok_or_else(|| Error::Parse(format!("table entry '{w}' is not q:value")))?;
                let q: u64 = q
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad table index '{q}'")))?;
                let v: f64 = v
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad table value '{v}'")))?;
                entries.push((q, v));
            }
            ApproxFunction::table(entries).map_err(|e| Error::Parse(e.to_string()))
        }
        "clamped" => {
            let cap_word = rest
                .first()
                .and_then(|w| w.strip_prefix("cap="))
                .ok_or_else(|| Error::Parse("clamped needs cap=<value> first".into()))?;
            let cap: f64 = cap_word
                .parse()
                .map_err(|_| Error::Parse(format!("bad cap '{cap_word}'")))?;
            if !(cap >= 0.0) {
                return Err(Error::Parse(format!("cap must be non-negative, got {cap}")));
            }
            Ok(parse_approx_words(&rest[1..])?.clamped(cap))
        }
        other => Err(Error::Parse(format!(
            "unknown approximating function '{other}'"
        ))),
    }
}

/// Parse `"dimfun c=1 s=1.75 a=0"`.
pub fn parse_dimfun(spec: &str) -> Result<DimensionFunction> {
    let words: Vec<&str> = spec.split_whitespace().collect();
    match words.split_first() {
        Some((&"dimfun", rest)) => {
            let kv = key_values(rest, &["c", "s", "a", "cap"])?;
            let s = req(kv[1], "s")?;
            let c = kv[0].unwrap_or(1.0);
            let a = kv[2].unwrap_or(0.0);
            let res = match kv[3] {
                Some(cap) => DimensionFunction::with_cap(c, s, a, cap),
                None => DimensionFunction::new(c, s, a),
            };
            res.map_err(|e| Error::Parse(e.to_string()))
        }
        _ => Err(Error::Parse(format!(
            "dimension function spec must start with 'dimfun': '{spec}'"
        ))),
    }
}

fn req(v: Option<f64>, name: &str) -> Result<f64> {
    v.ok_or_else(|| Error::Parse(format!("missing {name}=<value>")))
}

fn key_values(words: &[&str], keys: &[&str]) -> Result<Vec<Option<f64>>> {
    let mut out = vec![None; keys.len()];
    for w in words {
        let (k, v) = w
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("expected key=value, got '{w}'")))?;
        let idx = keys
            .iter()
            .position(|x| *x == k)
            .ok_or_else(|| Error::Parse(format!("unknown key '{k}'")))?;
        let val: f64 = v
            .parse()
            .map_err(|_| Error::Parse(format!("bad number '{v}' for {k}")))?;
        if !val.is_finite() {
            return Err(Error::Parse(format!("{k} must be finite")));
        }
        out[idx] = Some(val);
    }
    Ok(out)
}
