//! Exact enumeration over the discrete world's finite support.
//!
//! A [`JointTable`] is a probability mass function over a list of binary
//! variables, built by chaining conditional Bernoulli factors. Everything
//! the combination methods converge to can be computed on it exactly: the
//! imputation distribution, the recovered joint of the completed data, the
//! probability limit of each pooled estimator, and the potential-outcome
//! identities behind the covariate-only and two-stage imputation checks.

use serde::Serialize;

use crate::dgp::{expit, logit, DiscreteWorldParams};
use crate::error::{Error, Result};

/// Tolerance for identities that are pure sums and products.
pub const ARITHMETIC_TOL: f64 = 1e-12;
/// Tolerance for identities passing through expit/log.
pub const TRANSCENDENTAL_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Var {
    Z,
    X,
    A,
    Y,
    R,
    Y0,
    Y1,
    XStar,
    Y0Star,
    Y1Star,
}

const NVARS: usize = 10;

impl Var {
    fn slot(self) -> usize {
        self as usize
    }

    pub fn potential(a: u8) -> Var {
        if a == 1 {
            Var::Y1
        } else {
            Var::Y0
        }
    }

    fn potential_imputed(a: u8) -> Var {
        if a == 1 {
            Var::Y1Star
        } else {
            Var::Y0Star
        }
    }
}

/// Read access to one cell of a table.
#[derive(Clone, Copy)]
pub struct Cell<'a> {
    bits: usize,
    pos: &'a [Option<u8>; NVARS],
}

impl Cell<'_> {
    /// Value of `var` in this cell. Panics if the table lacks `var`.
    pub fn get(&self, var: Var) -> u8 {
        let p = self.pos[var.slot()].unwrap_or_else(|| panic!("table has no axis {var:?}"));
        ((self.bits >> p) & 1) as u8
    }

    fn matches(&self, event: &[(Var, u8)]) -> bool {
        event.iter().all(|&(v, val)| self.get(v) == val)
    }
}

/// Probability mass over the product of binary axes `vars`.
///
/// Cell index bit `i` holds the value of `vars[i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct JointTable {
    vars: Vec<Var>,
    pos: [Option<u8>; NVARS],
    mass: Vec<f64>,
}

impl JointTable {
    /// The table with no axes and a single cell of mass one.
    pub fn unit() -> Self {
        Self {
            vars: Vec::new(),
            pos: [None; NVARS],
            mass: vec![1.0],
        }
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    pub fn has(&self, var: Var) -> bool {
        self.pos[var.slot()].is_some()
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn cells(&self) -> impl Iterator<Item = (Cell<'_>, f64)> + '_ {
        self.mass.iter().enumerate().map(move |(bits, &m)| (Cell { bits, pos: &self.pos }, m))
    }

    /// Appends a binary axis with `P(var = 1 | cell) = p_one(cell)`.
    pub fn extend(&self, var: Var, p_one: impl Fn(&Cell) -> f64) -> Self {
        assert!(!self.has(var), "axis {var:?} already present");
        let k = self.vars.len();
        let mut mass = vec![0.0; self.mass.len() * 2];
        for (cell, m) in self.cells() {
            let p = p_one(&cell);
            mass[cell.bits] = m * (1.0 - p);
            mass[cell.bits | (1 << k)] = m * p;
        }
        let mut vars = self.vars.clone();
        vars.push(var);
        let mut pos = self.pos;
        pos[var.slot()] = Some(k as u8);
        Self { vars, pos, mass }
    }

    /// Distribution of `f(cell)` over the new axes `vars`.
    pub fn pushforward(&self, vars: &[Var], f: impl Fn(&Cell) -> Vec<u8>) -> Self {
        let mut pos = [None; NVARS];
        for (i, v) in vars.iter().enumerate() {
            assert!(pos[v.slot()].is_none(), "duplicate axis {v:?}");
            pos[v.slot()] = Some(i as u8);
        }
        let mut mass = vec![0.0; 1 << vars.len()];
        for (cell, m) in self.cells() {
            let vals = f(&cell);
            let idx = vals.iter().enumerate().fold(0usize, |acc, (i, &b)| acc | (usize::from(b) << i));
            mass[idx] += m;
        }
        Self {
            vars: vars.to_vec(),
            pos,
            mass,
        }
    }

    pub fn marginal(&self, keep: &[Var]) -> Self {
        self.pushforward(keep, |c| keep.iter().map(|&v| c.get(v)).collect())
    }

    /// The same distribution with axes listed in a different order.
    pub fn reorder(&self, vars: &[Var]) -> Self {
        assert_eq!(vars.len(), self.vars.len());
        self.marginal(vars)
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().sum()
    }

    pub fn prob(&self, event: &[(Var, u8)]) -> f64 {
        self.prob_where(|c| c.matches(event))
    }

    pub fn prob_where(&self, pred: impl Fn(&Cell) -> bool) -> f64 {
        self.cells().filter(|(c, _)| pred(c)).map(|(_, m)| m).sum()
    }

    /// `P(event | given)`; errors on a zero-mass conditioning event.
    pub fn conditional(&self, event: &[(Var, u8)], given: &[(Var, u8)]) -> Result<f64> {
        let mut joint = 0.0;
        let mut marg = 0.0;
        for (c, m) in self.cells() {
            if c.matches(given) {
                marg += m;
                if c.matches(event) {
                    joint += m;
                }
            }
        }
        if marg <= 0.0 {
            return Err(Error::DegenerateCell(describe(given)));
        }
        Ok(joint / marg)
    }

    /// Masses nonnegative and summing to one.
    pub fn validate(&self) -> Result<()> {
        if self.mass.iter().any(|&m| m.is_nan() || m < 0.0) {
            return Err(Error::Config("negative or NaN mass".into()));
        }
        let total = self.total();
        if (total - 1.0).abs() > ARITHMETIC_TOL {
            return Err(Error::Config(format!("masses sum to {total}")));
        }
        Ok(())
    }
}

fn describe(event: &[(Var, u8)]) -> String {
    let parts: Vec<String> = event.iter().map(|(v, x)| format!("{v:?}={x}")).collect();
    format!("({})", parts.join(", "))
}

/// Joint of `(Z, X, A, Y, R)` from the sequential factorization.
pub fn build_joint(params: &DiscreteWorldParams) -> Result<JointTable> {
    params.validate()?;
    Ok(JointTable::unit()
        .extend(Var::Z, |_| params.p_z)
        .extend(Var::X, |c| params.x_prob(c.get(Var::Z)))
        .extend(Var::A, |c| params.propensity(c.get(Var::Z), f64::from(c.get(Var::X))))
        .extend(Var::Y, |c| params.outcome_prob(c.get(Var::Z), c.get(Var::X), c.get(Var::A)))
        .extend(Var::R, |c| params.response_prob(c.get(Var::Z), c.get(Var::A), c.get(Var::Y))))
}

/// Joint of `(Z, X, A, Y0, Y1, Y, R)` with `Y0, Y1` independent given `(Z, X)`.
pub fn build_potential_joint(params: &DiscreteWorldParams) -> Result<JointTable> {
    params.validate()?;
    Ok(JointTable::unit()
        .extend(Var::Z, |_| params.p_z)
        .extend(Var::X, |c| params.x_prob(c.get(Var::Z)))
        .extend(Var::A, |c| params.propensity(c.get(Var::Z), f64::from(c.get(Var::X))))
        .extend(Var::Y0, |c| params.outcome_prob(c.get(Var::Z), c.get(Var::X), 0))
        .extend(Var::Y1, |c| params.outcome_prob(c.get(Var::Z), c.get(Var::X), 1))
        .extend(Var::Y, |c| f64::from(c.get(Var::potential(c.get(Var::A)))))
        .extend(Var::R, |c| params.response_prob(c.get(Var::Z), c.get(Var::A), c.get(Var::Y))))
}

/// `P(X = 1 | Z = z, A = a, Y = y)`, the correct imputation distribution.
pub fn cond_x(table: &JointTable, z: u8, a: u8, y: u8) -> Result<f64> {
    table.conditional(&[(Var::X, 1)], &[(Var::Z, z), (Var::A, a), (Var::Y, y)])
}

/// `e(z, x) = P(A = 1 | Z = z, X = x)`.
pub fn cell_propensity(table: &JointTable, z: u8, x: u8) -> Result<f64> {
    table.conditional(&[(Var::A, 1)], &[(Var::Z, z), (Var::X, x)])
}

/// `E{E[Y | Z, X, A=1] - E[Y | Z, X, A=0]}` over the table's `(Z, X)`.
pub fn g_formula(table: &JointTable) -> Result<f64> {
    let mut tau = 0.0;
    for z in 0..2u8 {
        for x in 0..2u8 {
            let pzx = table.prob(&[(Var::Z, z), (Var::X, x)]);
            if pzx == 0.0 {
                continue;
            }
            let mu1 = table.conditional(&[(Var::Y, 1)], &[(Var::Z, z), (Var::X, x), (Var::A, 1)])?;
            let mu0 = table.conditional(&[(Var::Y, 1)], &[(Var::Z, z), (Var::X, x), (Var::A, 0)])?;
            tau += pzx * (mu1 - mu0);
        }
    }
    Ok(tau)
}

/// Adds an imputed copy `X*` drawn from `P(X | Z, A, Y)` independently of
/// everything else given `(Z, A, Y)`.
pub fn impute_table(table: &JointTable) -> Result<JointTable> {
    let base = table.marginal(&[Var::Z, Var::X, Var::A, Var::Y]);
    let mut q = [[[f64::NAN; 2]; 2]; 2];
    for z in 0..2u8 {
        for a in 0..2u8 {
            for y in 0..2u8 {
                // zero-mass cells never receive imputations
                q[z as usize][a as usize][y as usize] = cond_x(&base, z, a, y).unwrap_or(0.0);
            }
        }
    }
    Ok(table.extend(Var::XStar, |c| {
        q[c.get(Var::Z) as usize][c.get(Var::A) as usize][c.get(Var::Y) as usize]
    }))
}

/// `X† = R X + (1 - R) X*`.
pub fn x_dagger(c: &Cell) -> u8 {
    if c.get(Var::R) == 1 {
        c.get(Var::X)
    } else {
        c.get(Var::XStar)
    }
}

/// Distribution of `(Z, X†, A, Y)` in a completed dataset; the `X` axis of
/// the result holds `X†`.
pub fn completed_table(table: &JointTable) -> Result<JointTable> {
    let imputed = impute_table(table)?;
    Ok(imputed.pushforward(&[Var::Z, Var::X, Var::A, Var::Y], |c| {
        vec![c.get(Var::Z), x_dagger(c), c.get(Var::A), c.get(Var::Y)]
    }))
}

/// Per-cell quantity a pooled method assigns to one `(z, x, a, y, r)` cell.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellProxy {
    pub z: u8,
    pub x: u8,
    pub a: u8,
    pub y: u8,
    pub r: u8,
    pub mass: f64,
    /// Proxy propensity score (aPS, aPM) or proxy weight (aPW, imPW).
    pub proxy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlimReport {
    pub method: String,
    /// Probability limit of the Hájek form.
    pub plim: f64,
    /// Probability limit of the Horvitz–Thompson form.
    pub plim_ht: f64,
    pub tau: f64,
    pub bias: f64,
    /// `E[A w]` and `E[(1-A) w]`; both equal one when the weights are unbiased.
    pub weight_mass: [f64; 2],
    pub cells: Vec<CellProxy>,
}

#[derive(Clone, Copy)]
enum Proxy {
    Propensity(f64),
    Weight(f64),
}

fn check_open(p: f64, c: &Cell) -> Result<f64> {
    if p > 0.0 && p < 1.0 {
        Ok(p)
    } else {
        Err(Error::Positivity {
            location: format!(
                "cell (z={}, x={}, a={}, y={}, r={})",
                c.get(Var::Z),
                c.get(Var::X),
                c.get(Var::A),
                c.get(Var::Y),
                c.get(Var::R)
            ),
            value: p,
        })
    }
}

/// Plims of the HT and Hájek estimands with every unit weighted by the
/// proxy its cell receives.
fn ipw_plim(
    table: &JointTable,
    method: &str,
    proxy: impl Fn(&Cell) -> Result<Proxy>,
) -> Result<PlimReport> {
    let tau = g_formula(table)?;
    let mut num = [0.0; 2];
    let mut den = [0.0; 2];
    let mut cells = Vec::new();
    for (c, m) in table.cells() {
        if m == 0.0 {
            continue;
        }
        let a = c.get(Var::A);
        let (w, shown) = match proxy(&c)? {
            Proxy::Propensity(p) => {
                let p = check_open(p, &c)?;
                (if a == 1 { 1.0 / p } else { 1.0 / (1.0 - p) }, p)
            }
            Proxy::Weight(w) => (w, w),
        };
        let g = a as usize;
        num[g] += m * w * f64::from(c.get(Var::Y));
        den[g] += m * w;
        cells.push(CellProxy {
            z: c.get(Var::Z),
            x: c.get(Var::X),
            a,
            y: c.get(Var::Y),
            r: c.get(Var::R),
            mass: m,
            proxy: shown,
        });
    }
    if den[0] <= 0.0 || den[1] <= 0.0 {
        return Err(Error::GroupEmpty { group: u8::from(den[1] > 0.0) });
    }
    let plim = num[1] / den[1] - num[0] / den[0];
    Ok(PlimReport {
        method: method.to_string(),
        plim,
        plim_ht: num[1] - num[0],
        tau,
        bias: plim - tau,
        weight_mass: [den[0], den[1]],
        cells,
    })
}

/// Cached conditionals of a `(Z, X, A, Y, R)` table.
struct Conditionals {
    e: [[f64; 2]; 2],
    q: [[[f64; 2]; 2]; 2],
}

impl Conditionals {
    fn new(table: &JointTable) -> Result<Self> {
        let mut e = [[0.0; 2]; 2];
        let mut q = [[[f64::NAN; 2]; 2]; 2];
        for z in 0..2u8 {
            for x in 0..2u8 {
                e[z as usize][x as usize] = cell_propensity(table, z, x)?;
            }
            for a in 0..2u8 {
                for y in 0..2u8 {
                    if let Ok(v) = cond_x(table, z, a, y) {
                        q[z as usize][a as usize][y as usize] = v;
                    }
                }
            }
        }
        Ok(Self { e, q })
    }

    fn e(&self, c: &Cell) -> f64 {
        self.e[c.get(Var::Z) as usize][c.get(Var::X) as usize]
    }

    /// `E[f(e(z, X)) | z, a, y]` for the cell's `(z, a, y)`.
    fn mean_over_x(&self, c: &Cell, f: impl Fn(f64) -> f64) -> Result<f64> {
        let z = c.get(Var::Z) as usize;
        let q = self.q[z][c.get(Var::A) as usize][c.get(Var::Y) as usize];
        if q.is_nan() {
            return Err(Error::DegenerateCell(format!(
                "(Z={z}, A={}, Y={})",
                c.get(Var::A),
                c.get(Var::Y)
            )));
        }
        Ok(q * f(self.e[z][1]) + (1.0 - q) * f(self.e[z][0]))
    }
}

fn ipw_weight(e: f64, a: u8) -> f64 {
    if a == 1 {
        1.0 / e
    } else {
        1.0 / (1.0 - e)
    }
}

/// Averaged propensity scores: missing-`X` cells get `E[e(Z,X) | Z,A,Y]`.
pub fn plim_aps(table: &JointTable) -> Result<PlimReport> {
    let k = Conditionals::new(table)?;
    ipw_plim(table, "aps", |c| {
        Ok(Proxy::Propensity(if c.get(Var::R) == 1 {
            k.e(c)
        } else {
            k.mean_over_x(c, |e| e)?
        }))
    })
}

/// Averaged model parameters with mean-imputed `X`: missing-`X` cells get
/// `expit(E[logit e(Z,X) | Z,A,Y])`.
pub fn plim_apm(table: &JointTable) -> Result<PlimReport> {
    let k = Conditionals::new(table)?;
    ipw_plim(table, "apm", |c| {
        Ok(Proxy::Propensity(if c.get(Var::R) == 1 {
            k.e(c)
        } else {
            expit(k.mean_over_x(c, logit)?)
        }))
    })
}

fn proxy_weight_plim(table: &JointTable, method: &str) -> Result<PlimReport> {
    let k = Conditionals::new(table)?;
    ipw_plim(table, method, |c| {
        let a = c.get(Var::A);
        Ok(Proxy::Weight(if c.get(Var::R) == 1 {
            ipw_weight(k.e(c), a)
        } else {
            k.mean_over_x(c, |e| ipw_weight(e, a))?
        }))
    })
}

/// Averaged inverse probability weights: missing-`X` cells get
/// `E[w(Z,X,A) | Z,A,Y]`.
pub fn plim_apw(table: &JointTable) -> Result<PlimReport> {
    proxy_weight_plim(table, "apw")
}

/// Mean-imputed weights; targets the same proxy as [`plim_apw`].
pub fn plim_impw(table: &JointTable) -> Result<PlimReport> {
    proxy_weight_plim(table, "impw")
}

/// The within method's limit: the g-formula on the completed-data joint.
pub fn plim_within(table: &JointTable) -> Result<f64> {
    g_formula(&completed_table(table)?)
}

/// Finite-`M` limit of the aPS estimator in the discrete world: a
/// missing-`X` unit's averaged score is `e(z,0) + (K/M)(e(z,1) - e(z,0))`
/// with `K ~ Binomial(M, P(X=1 | z,a,y))`, enumerated exactly.
pub fn plim_aps_finite(table: &JointTable, m: usize) -> Result<PlimReport> {
    finite_m_plim(table, m, "aps", |e0, e1, share| e0 + share * (e1 - e0))
}

/// Finite-`M` limit of the aPM estimator: the pooled model is scored at the
/// mean imputation `K/M`, i.e. the logit interpolates linearly in `K/M`.
pub fn plim_apm_finite(table: &JointTable, m: usize) -> Result<PlimReport> {
    finite_m_plim(table, m, "apm", |e0, e1, share| {
        expit(logit(e0) + share * (logit(e1) - logit(e0)))
    })
}

fn finite_m_plim(
    table: &JointTable,
    m: usize,
    method: &str,
    proxy: impl Fn(f64, f64, f64) -> f64,
) -> Result<PlimReport> {
    if m == 0 {
        return Err(Error::Size("m must be positive".into()));
    }
    let k = Conditionals::new(table)?;
    let tau = g_formula(table)?;
    let mut num = [0.0; 2];
    let mut den = [0.0; 2];
    for (c, mass) in table.cells() {
        if mass == 0.0 {
            continue;
        }
        let a = c.get(Var::A);
        let y = f64::from(c.get(Var::Y));
        let g = a as usize;
        if c.get(Var::R) == 1 {
            let w = ipw_weight(check_open(k.e(&c), &c)?, a);
            num[g] += mass * w * y;
            den[g] += mass * w;
            continue;
        }
        let z = c.get(Var::Z) as usize;
        let q = k.q[z][g][c.get(Var::Y) as usize];
        let (e0, e1) = (k.e[z][0], k.e[z][1]);
        for (j, pj) in binomial_pmf(m, q).into_iter().enumerate() {
            let p = check_open(proxy(e0, e1, j as f64 / m as f64), &c)?;
            let w = ipw_weight(p, a);
            num[g] += mass * pj * w * y;
            den[g] += mass * pj * w;
        }
    }
    let plim = num[1] / den[1] - num[0] / den[0];
    Ok(PlimReport {
        method: format!("{method}_m{m}"),
        plim,
        plim_ht: num[1] - num[0],
        tau,
        bias: plim - tau,
        weight_mass: [den[0], den[1]],
        cells: Vec::new(),
    })
}

fn binomial_pmf(m: usize, q: f64) -> Vec<f64> {
    // recursive ratio form; q in (0, 1) for every positive-mass cell
    let mut pmf = vec![0.0; m + 1];
    let ln_q = q.ln();
    let ln_1q = (1.0 - q).ln();
    let mut ln_choose = 0.0;
    for (j, slot) in pmf.iter_mut().enumerate() {
        if j > 0 {
            ln_choose += ((m - j + 1) as f64).ln() - (j as f64).ln();
        }
        *slot = (ln_choose + j as f64 * ln_q + (m - j) as f64 * ln_1q).exp();
    }
    pmf
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AppendixAReport {
    /// Largest `|P(X*=x | Y_a, Z, A=1-a) - P(X=x | Y_a, Z, A=1-a)|`.
    pub max_red_gap: f64,
    /// Largest `|P(X*=x | Y_a, Z, A=a) - P(X=x | Y_a, Z, A=a)|`.
    pub max_blue_gap: f64,
    /// Conditioning cells with zero mass, excluded from both maxima.
    pub skipped: usize,
}

/// Whether covariate imputation preserves `P(X | Y_a, Z, A)`: it does when
/// `A = a` (the potential outcome is the observed one) but in general not
/// when `A = 1 - a`.
pub fn check_appendix_a(params: &DiscreteWorldParams) -> Result<AppendixAReport> {
    let table = impute_table(&build_potential_joint(params)?)?;
    let mut red: f64 = 0.0;
    let mut blue: f64 = 0.0;
    let mut skipped = 0;
    for a in 0..2u8 {
        let ya_var = Var::potential(a);
        for arm in 0..2u8 {
            for z in 0..2u8 {
                for ya in 0..2u8 {
                    let given = [(ya_var, ya), (Var::Z, z), (Var::A, arm)];
                    for x in 0..2u8 {
                        let imputed = table.conditional(&[(Var::XStar, x)], &given);
                        let actual = table.conditional(&[(Var::X, x)], &given);
                        match (imputed, actual) {
                            (Ok(p), Ok(q)) => {
                                let gap = (p - q).abs();
                                if arm == a {
                                    blue = blue.max(gap);
                                } else {
                                    red = red.max(gap);
                                }
                            }
                            _ => skipped += 1,
                        }
                    }
                }
            }
        }
    }
    Ok(AppendixAReport {
        max_red_gap: red,
        max_blue_gap: blue,
        skipped,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AppendixBReport {
    /// Largest cell gap between `P(Z, X†, A, Y_a†)` and `P(Z, X, A, Y_a)`
    /// (together with `P(Z, X†, A, Y)` against `P(Z, X, A, Y)`) under the
    /// two-stage scheme.
    pub max_joint_gap: f64,
    /// Largest gap between `P(Z, X†, A, Y_a)` and `P(Z, X, A, Y_a)` when only
    /// `X` is imputed and paired with the true potential outcome.
    pub naive_gap: f64,
}

/// Two-stage imputation: `X*` from `P(X | Z, A, Y)`, then `Y_a*` from
/// `P(Y_a | Z, X†)`; `Y_a†` is the observed outcome when `A = a`.
pub fn check_appendix_b(params: &DiscreteWorldParams) -> Result<AppendixBReport> {
    let base = build_joint(params)?;
    let mut mu = [[[0.0; 2]; 2]; 2];
    for z in 0..2u8 {
        for x in 0..2u8 {
            for a in 0..2u8 {
                // P(Y_a = 1 | Z, X) = P(Y = 1 | Z, X, A = a) under unconfoundedness
                mu[z as usize][x as usize][a as usize] =
                    base.conditional(&[(Var::Y, 1)], &[(Var::Z, z), (Var::X, x), (Var::A, a)])?;
            }
        }
    }
    let table = impute_table(&build_potential_joint(params)?)?
        .extend(Var::Y0Star, |c| mu[c.get(Var::Z) as usize][x_dagger(c) as usize][0])
        .extend(Var::Y1Star, |c| mu[c.get(Var::Z) as usize][x_dagger(c) as usize][1]);

    let y_dagger = |c: &Cell, a: u8| {
        if c.get(Var::A) == a {
            c.get(Var::Y)
        } else {
            c.get(Var::potential_imputed(a))
        }
    };

    let mut joint_gap: f64 = 0.0;
    let mut naive_gap: f64 = 0.0;
    for z in 0..2u8 {
        for x in 0..2u8 {
            for arm in 0..2u8 {
                for y in 0..2u8 {
                    let p_obs = table.prob(&[(Var::Z, z), (Var::X, x), (Var::A, arm), (Var::Y, y)]);
                    let p_dag = table.prob_where(|c| {
                        c.get(Var::Z) == z && x_dagger(c) == x && c.get(Var::A) == arm && c.get(Var::Y) == y
                    });
                    joint_gap = joint_gap.max((p_obs - p_dag).abs());
                    for a in 0..2u8 {
                        let ya = Var::potential(a);
                        let truth = table.prob(&[(Var::Z, z), (Var::X, x), (Var::A, arm), (ya, y)]);
                        let recovered = table.prob_where(|c| {
                            c.get(Var::Z) == z
                                && x_dagger(c) == x
                                && c.get(Var::A) == arm
                                && y_dagger(c, a) == y
                        });
                        let naive = table.prob_where(|c| {
                            c.get(Var::Z) == z && x_dagger(c) == x && c.get(Var::A) == arm && c.get(ya) == y
                        });
                        joint_gap = joint_gap.max((truth - recovered).abs());
                        naive_gap = naive_gap.max((truth - naive).abs());
                    }
                }
            }
        }
    }
    Ok(AppendixBReport {
        max_joint_gap: joint_gap,
        naive_gap,
    })
}
