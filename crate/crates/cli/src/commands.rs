//! One function per subcommand; each returns a table and a count of infeasible rows.

use crate::output::{num, opt, Table};
use crate::settings::{parse_grid, Settings};
use anyhow::{bail, Context, Result};
use privleak_core::dual::{dual_solve, DualConfig};
use privleak_core::mechanisms::build_bsc;
use privleak_core::oracle::bsc_distortion_inverse;
use privleak_core::primal::{primal_sweep, PrimalConfig, TradeoffPoint};
use privleak_core::{
    max_leakage, to_bits, DistortionMetric, DistortionModel, Error, JointPrior, LeakageConfig, Mechanism,
    MechanismSpec, ProblemSpace, Query,
};
use rayon::prelude::*;

/// Reference leakage cells for `ε = 1`, `n = 4`: `(b, laplace, exponential)`.
pub const TABLE3_REFERENCE: [(f64, f64, f64); 6] = [
    (0.0, 0.079, 0.032),
    (0.5, 0.062, 0.024),
    (1.0, 0.041, 0.015),
    (1.5, 0.022, 0.008),
    (2.0, 0.009, 0.003),
    (f64::NAN, 0.000, 0.000),
];
pub const TABLE3_TOLERANCE: f64 = 0.01;
/// The exponential `b = 0` cell disagrees with its own closed form by about 0.002.
pub const TABLE3_EXP_ZERO_TOLERANCE: f64 = 0.005;

pub struct Outcome {
    pub table: Table,
    pub infeasible: usize,
}

pub struct Ctx {
    pub settings: Settings,
    pub seed: u64,
    pub restarts: usize,
    pub bits: bool,
    pub extended: bool,
}

impl Ctx {
    pub fn new(settings: Settings) -> Result<Self> {
        Ok(Self {
            seed: settings.get("seed")?,
            restarts: settings.get("restarts")?,
            bits: settings.flag("bits")?,
            extended: settings.flag("extended")?,
            settings,
        })
    }

    fn leakage(&self, b: f64) -> LeakageConfig {
        LeakageConfig { restarts: self.restarts, seed: self.seed, ..LeakageConfig::with_bound(b) }
    }

    fn units(&self) -> String {
        if self.bits { "bits" } else { "nats" }.to_string()
    }

    fn shown(&self, nats: f64) -> String {
        num(if self.bits { to_bits(nats) } else { nats })
    }

    fn query(&self) -> Result<Query> {
        self.settings.get::<Query>("query")
    }

    fn mechs(&self) -> Result<Vec<MechanismSpec>> {
        self.settings.list("mech")
    }
}

/// Binary records with the query's natural output alphabet.
pub fn space_for(n: usize, query: &Query) -> Result<ProblemSpace> {
    let probe = ProblemSpace::binary(n, 2)?;
    let m = query.natural_output_size(&probe).max(2);
    Ok(ProblemSpace::binary(n, m)?)
}

fn model_for(space: &ProblemSpace, query: &Query) -> Result<(JointPrior, DistortionModel)> {
    let p0 = JointPrior::uniform(space);
    let model = DistortionModel::new(space, &p0, query, &DistortionMetric::AbsoluteDifference)?;
    Ok((p0, model))
}

fn spec_parameter(spec: &MechanismSpec) -> Option<f64> {
    match spec {
        MechanismSpec::GeneralizedBsc(v) | MechanismSpec::LaplaceThresholded(v) | MechanismSpec::ExponentialBinary(v) => {
            Some(*v)
        }
        MechanismSpec::FromFile(_) => None,
    }
}

fn is_infeasible<T>(r: &privleak_core::Result<T>) -> bool {
    matches!(r, Err(Error::Infeasible(_)))
}

pub fn audit(ctx: &Ctx) -> Result<Outcome> {
    let query = ctx.query()?;
    let mut jobs = Vec::new();
    for mech in ctx.mechs()? {
        for n in ctx.settings.list::<usize>("n")? {
            let space = space_for(n, &query)?;
            let q = mech.realize(&space, &query, ctx.extended).with_context(|| format!("building {mech}"))?;
            for b in parse_grid(ctx.settings.raw("b").unwrap_or("0"), space.max_entropy())? {
                jobs.push((mech.clone(), n, space.clone(), q.clone(), b));
            }
        }
    }
    let results: Vec<_> = jobs
        .into_par_iter()
        .map(|(mech, n, space, q, b)| (mech, n, b, max_leakage(&space, &q, &ctx.leakage(b))))
        .collect();
    let mut table = Table::new(vec![
        "mechanism", "n", "query", "b", "leakage_nats", "leakage", "units", "worst_record", "iterations", "restarts",
        "feasible",
    ]);
    let mut infeasible = 0;
    for (mech, n, b, r) in results {
        let head = vec![mech.to_string(), n.to_string(), query.to_string(), num(b)];
        let tail = match r {
            Ok(r) => {
                infeasible += usize::from(!r.feasible);
                vec![
                    num(r.leakage),
                    ctx.shown(r.leakage),
                    ctx.units(),
                    r.worst_record.to_string(),
                    r.iterations.to_string(),
                    r.restarts_used.to_string(),
                    r.feasible.to_string(),
                ]
            }
            Err(Error::Infeasible(_)) => {
                infeasible += 1;
                vec![String::new(), String::new(), ctx.units(), String::new(), String::new(), String::new(), "false".into()]
            }
            Err(e) => return Err(e).with_context(|| format!("auditing {mech} at n={n}, b={b}")),
        };
        table.push([head, tail].concat());
    }
    Ok(Outcome { table, infeasible })
}

pub fn sweep_b(ctx: &Ctx) -> Result<Outcome> {
    let query = ctx.query()?;
    let mut jobs = Vec::new();
    for n in ctx.settings.list::<usize>("n")? {
        let space = space_for(n, &query)?;
        for mech in ctx.mechs()? {
            let q = mech.realize(&space, &query, ctx.extended).with_context(|| format!("building {mech}"))?;
            for b in parse_grid(ctx.settings.raw("grid").unwrap_or("0:max:20"), space.max_entropy())? {
                jobs.push((n, mech.clone(), space.clone(), q.clone(), b));
            }
        }
    }
    let results: Vec<_> = jobs
        .into_par_iter()
        .map(|(n, mech, space, q, b)| (n, mech, b, max_leakage(&space, &q, &ctx.leakage(b))))
        .collect();
    let mut table =
        Table::new(vec!["n", "mechanism", "p_or_eps", "b", "leakage_nats", "leakage", "units", "restarts_used"]);
    for (n, mech, b, r) in results {
        let r = r.with_context(|| format!("auditing {mech} at n={n}, b={b}"))?;
        table.push(vec![
            n.to_string(),
            mech.to_string(),
            opt(spec_parameter(&mech)),
            num(b),
            num(r.leakage),
            ctx.shown(r.leakage),
            ctx.units(),
            r.restarts_used.to_string(),
        ]);
    }
    Ok(Outcome { table, infeasible: 0 })
}

/// Generalized-BSC flip probability whose expected distortion equals `d` (or 1/2 when even
/// that cannot reach `d`).
pub fn matched_flip(space: &ProblemSpace, query: &Query, model: &DistortionModel, d: f64) -> Result<f64> {
    let e = |p: f64| -> Result<f64> { Ok(model.expected(&build_bsc(space, query, p)?)) };
    if e(0.5)? <= d {
        return Ok(0.5);
    }
    let (mut lo, mut hi) = (0.0, 0.5);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if e(mid)? <= d {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

fn laplace_epsilon(p: f64) -> Option<f64> {
    (p > 0.0 && p < 0.5).then(|| -2.0 * (2.0 * p).ln())
}

fn exponential_epsilon(p: f64) -> Option<f64> {
    (p > 0.0 && p < 0.5).then(|| 2.0 * ((1.0 - p) / p).ln())
}

fn point_or_infeasible(r: privleak_core::Result<TradeoffPoint>) -> Result<Option<TradeoffPoint>> {
    if is_infeasible(&r) {
        return Ok(None);
    }
    Ok(Some(r?))
}

pub fn primal(ctx: &Ctx) -> Result<Outcome> {
    let query = ctx.query()?;
    let n: usize = ctx.settings.get("n")?;
    let b: f64 = ctx.settings.get("b")?;
    let space = space_for(n, &query)?;
    let (p0, model) = model_for(&space, &query)?;
    let spec = ctx.settings.raw("D").or(ctx.settings.raw("grid")).unwrap_or("0.05:0.45:9");
    // `max` is the distortion of the best constant answer, where leakage reaches zero.
    let grid = parse_grid(spec, model.best_constant_output().1)?;
    let cfg = PrimalConfig { leakage: ctx.leakage(b), ..PrimalConfig::new(0.0, b) };
    // Solves are warm-started in order; baselines are independent.
    let points = primal_sweep(&space, &p0, &model, &grid, &cfg);
    let binary = space.output_size() == 2;
    let baselines: Vec<Result<(f64, f64)>> = grid
        .par_iter()
        .map(|&d| {
            let p = matched_flip(&space, &query, &model, d)?;
            let q = build_bsc(&space, &query, p)?;
            Ok((p, max_leakage(&space, &q, &ctx.leakage(b))?.leakage))
        })
        .collect();
    let mut table = Table::new(vec![
        "D_requested", "D_achieved", "leakage_nats", "leakage", "units", "iterations", "feasible", "baseline_flip",
        "baseline_leakage_nats", "laplace_eps", "exponential_eps",
    ]);
    let mut infeasible = 0;
    for ((d, pt), base) in grid.iter().zip(points).zip(baselines) {
        let (p, base_leak) = base?;
        let solved = match point_or_infeasible(pt)? {
            Some(pt) => {
                infeasible += usize::from(!pt.feasible);
                vec![
                    num(pt.distortion),
                    num(pt.leakage),
                    ctx.shown(pt.leakage),
                    ctx.units(),
                    pt.iterations.to_string(),
                    pt.feasible.to_string(),
                ]
            }
            None => {
                infeasible += 1;
                vec![String::new(), String::new(), String::new(), ctx.units(), String::new(), "false".into()]
            }
        };
        let base = vec![
            num(p),
            num(base_leak),
            opt(laplace_epsilon(p).filter(|_| binary)),
            opt(exponential_epsilon(p).filter(|_| binary)),
        ];
        table.push([vec![num(*d)], solved, base].concat());
    }
    Ok(Outcome { table, infeasible })
}

pub fn dual(ctx: &Ctx) -> Result<Outcome> {
    let query = ctx.query()?;
    let n: usize = ctx.settings.get("n")?;
    let b: f64 = ctx.settings.get("b")?;
    let space = space_for(n, &query)?;
    let (p0, model) = model_for(&space, &query)?;
    let spec = ctx.settings.raw("L").or(ctx.settings.raw("grid")).unwrap_or("0.1*max:0.9*max:9");
    let grid = parse_grid(spec, (space.output_size() as f64).ln())?;
    let cfg = DualConfig {
        leakage: ctx.leakage(b),
        zigzag_damping: ctx.settings.flag("zigzag")?,
        ..DualConfig::new(1.0, b)
    };
    let certified = query == Query::parity() && b == 0.0;
    let points: Vec<_> = grid
        .par_iter()
        .map(|&l| dual_solve(&space, &p0, &model, &DualConfig { leakage_bound: l, ..cfg.clone() }))
        .collect();
    let mut table = Table::new(vec![
        "L_requested", "L_achieved_nats", "L_achieved", "units", "distortion", "iterations", "feasible",
        "bsc_certificate",
    ]);
    let mut infeasible = 0;
    for (l, pt) in grid.iter().zip(points) {
        let pt = pt.with_context(|| format!("solving L={l}"))?;
        infeasible += usize::from(!pt.feasible);
        table.push(vec![
            num(*l),
            num(pt.leakage),
            ctx.shown(pt.leakage),
            ctx.units(),
            num(pt.distortion),
            pt.iterations.to_string(),
            pt.feasible.to_string(),
            opt(certified.then(|| bsc_distortion_inverse(*l))),
        ]);
    }
    Ok(Outcome { table, infeasible })
}

pub fn table3(ctx: &Ctx) -> Result<Outcome> {
    let query = ctx.query()?;
    let n: usize = ctx.settings.get("n")?;
    let eps: f64 = ctx.settings.get("eps")?;
    let space = space_for(n, &query)?;
    if space.output_size() != 2 {
        bail!("table3 needs a binary-output query");
    }
    let reference = n == 4 && eps == 1.0 && query == Query::parity();
    let mechs = [
        ("laplace", MechanismSpec::LaplaceThresholded(eps)),
        ("exponential", MechanismSpec::ExponentialBinary(eps)),
    ];
    let mut jobs = Vec::new();
    for (name, spec) in &mechs {
        let q = spec.realize(&space, &query, ctx.extended)?;
        for (row, &(b, lap, exp)) in TABLE3_REFERENCE.iter().enumerate() {
            let b = if b.is_nan() { space.max_entropy() } else { b };
            let (r, tol) = match *name {
                "laplace" => (lap, TABLE3_TOLERANCE),
                _ if row == 0 => (exp, TABLE3_EXP_ZERO_TOLERANCE),
                _ => (exp, TABLE3_TOLERANCE),
            };
            jobs.push((*name, q.clone(), b, r, tol));
        }
    }
    let results: Vec<_> = jobs
        .into_par_iter()
        .map(|(name, q, b, r, tol)| (name, b, r, tol, max_leakage(&space, &q, &ctx.leakage(b))))
        .collect();
    let mut table = Table::new(vec![
        "mechanism", "b", "leakage_nats", "leakage", "units", "reference_nats", "delta", "tolerance", "within_tolerance",
    ]);
    for (name, b, r, tol, res) in results {
        let res = res.with_context(|| format!("auditing {name} at b={b}"))?;
        let (refv, delta, ok) = if reference {
            let d = res.leakage - r;
            (num(r), num(d), (d.abs() <= tol).to_string())
        } else {
            Default::default()
        };
        table.push(vec![
            name.to_string(),
            num(b),
            num(res.leakage),
            ctx.shown(res.leakage),
            ctx.units(),
            refv,
            delta,
            if reference { num(tol) } else { String::new() },
            ok,
        ]);
    }
    Ok(Outcome { table, infeasible: 0 })
}

pub fn compare(ctx: &Ctx) -> Result<Outcome> {
    let query = ctx.query()?;
    enum Job {
        Bsc { n: usize, b: f64, p: f64 },
        Dp { n: usize, name: &'static str, eps: f64 },
    }
    let mut jobs = Vec::new();
    for n in ctx.settings.list::<usize>("n")? {
        let space = space_for(n, &query)?;
        for b in parse_grid(ctx.settings.raw("b").unwrap_or("0"), space.max_entropy())? {
            for p in parse_grid(ctx.settings.raw("grid").unwrap_or("0.05:0.45:9"), 0.5)? {
                jobs.push(Job::Bsc { n, b, p });
            }
        }
        for eps in parse_grid(ctx.settings.raw("eps").unwrap_or("0.25:4:16"), 1.0)? {
            jobs.push(Job::Dp { n, name: "laplace", eps });
            jobs.push(Job::Dp { n, name: "exponential", eps });
        }
    }
    let rows: Vec<Result<Vec<String>>> = jobs
        .into_par_iter()
        .map(|job| {
            let (n, name, b, param, spec) = match job {
                Job::Bsc { n, b, p } => (n, "bsc", b, p, MechanismSpec::GeneralizedBsc(p)),
                Job::Dp { n, name: "laplace", eps } => (n, "laplace", 0.0, eps, MechanismSpec::LaplaceThresholded(eps)),
                Job::Dp { n, name, eps } => (n, name, 0.0, eps, MechanismSpec::ExponentialBinary(eps)),
            };
            let space = space_for(n, &query)?;
            let (_, model) = model_for(&space, &query)?;
            let q: Mechanism = spec.realize(&space, &query, ctx.extended)?;
            let leak = max_leakage(&space, &q, &ctx.leakage(b))?.leakage;
            let epsilon = if name == "bsc" { leak } else { param };
            Ok(vec![
                n.to_string(),
                name.to_string(),
                num(b),
                num(param),
                num(epsilon),
                num(model.expected(&q)),
                num(leak),
                ctx.shown(leak),
                ctx.units(),
            ])
        })
        .collect();
    let mut table = Table::new(vec![
        "n", "mechanism", "b", "parameter", "epsilon", "distortion", "leakage_nats", "leakage", "units",
    ]);
    for r in rows {
        table.push(r?);
    }
    Ok(Outcome { table, infeasible: 0 })
}
