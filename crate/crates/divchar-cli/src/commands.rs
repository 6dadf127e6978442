//! The four subcommands. `verify` runs every exact-identity suite and exits
//! nonzero on any failure; `sum` and `scan` emit report rows; `table` prints
//! the per-family aggregate of a scan.

use crate::config::{parse_character_spec, parse_twist_spec, ExperimentConfig, ModPCharSpec};
use crate::ensemble::{self, Member};
use crate::report::{
    aggregate, flags_string, write_aggregate_table, write_csv, write_json, ReportMeta, ReportRow,
};
use crate::{Cli, Command};
use anyhow::{bail, Context, Result};
use divchar::characters::CharacterModP;
use divchar::checks;
use divchar::multiplicative::{SieveTables, SmoothParams, Twist, SIEVE_CAP};
use divchar::sums::{
    bound_rhs, moebius_sq_audit, sum_s, BoundParams, SumContext, SumOpts, SumsError, Theorem,
};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::Serialize;
use std::fs;
use std::io::Write as _;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

pub fn dispatch(cli: Cli) -> Result<i32> {
    let cfg = load_config(&cli)?;
    match cli.command {
        Command::Verify => {
            let report = run_verify(&cfg)?;
            let code = report.exit_code();
            let text = serde_json::to_string_pretty(&report)?;
            write_output(&cfg, &format!("{text}\n"))?;
            eprintln!(
                "verify: {}/{} checks passed over {} contexts",
                report.checks.iter().filter(|c| c.passed).count(),
                report.checks.len(),
                report.contexts
            );
            Ok(code)
        }
        Command::Sum => {
            let rows = run_sum(&cfg)?;
            emit_rows(&cfg, &rows)?;
            Ok(0)
        }
        Command::Scan => {
            let rows = run_scan(&cfg)?;
            let aggs = aggregate(&rows);
            let mut summary = Vec::new();
            write_aggregate_table(&mut summary, &aggs)?;
            eprint!("{}", String::from_utf8_lossy(&summary));
            emit_rows(&cfg, &rows)?;
            Ok(0)
        }
        Command::Table => {
            let rows = run_scan(&cfg)?;
            let aggs = aggregate(&rows);
            let mut out = Vec::new();
            write_aggregate_table(&mut out, &aggs)?;
            write_output(&cfg, &String::from_utf8_lossy(&out))?;
            Ok(0)
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            ExperimentConfig::from_toml(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.ensemble.seed = seed;
    }
    if let Some(workers) = cli.workers {
        cfg.output.workers = workers;
    }
    if let Some(out) = &cli.out {
        cfg.output.out_path = out.display().to_string();
    }
    if let Some(format) = &cli.format {
        cfg.output.format = format.clone();
    }
    if cli.override_range {
        cfg.schedule.override_range = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_output(cfg: &ExperimentConfig, text: &str) -> Result<()> {
    if cfg.output.out_path.is_empty() {
        print!("{text}");
        std::io::stdout().flush()?;
    } else {
        fs::write(&cfg.output.out_path, text)
            .with_context(|| format!("writing {}", cfg.output.out_path))?;
    }
    Ok(())
}

fn emit_rows(cfg: &ExperimentConfig, rows: &[ReportRow]) -> Result<()> {
    let meta = ReportMeta::new(cfg.hash());
    let mut buf = Vec::new();
    match cfg.output.format.as_str() {
        "json" => write_json(&mut buf, &meta, rows)?,
        _ => write_csv(&mut buf, &meta, rows)?,
    }
    write_output(cfg, &String::from_utf8_lossy(&buf))
}

/// Fixed-order pool: job i's result lands in slot i, so the output order is
/// independent of the worker count.
fn run_jobs<T, F>(count: usize, workers: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    if workers <= 1 || count <= 1 {
        return (0..count).map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<T>>> = (0..count).map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers.min(count) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= count {
                    break;
                }
                let r = f(i);
                *slots[i].lock().expect("slot lock") = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().expect("slot lock").expect("job ran"))
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct ContextDesc {
    pub p: u64,
    pub a: u64,
    pub b: u64,
    #[serde(rename = "Px")]
    pub px: u64,
    #[serde(rename = "Py")]
    pub py: u64,
    pub d: u64,
    pub label: u64,
}

impl ContextDesc {
    fn new(m: &Member, spec: ModPCharSpec) -> Self {
        let (px, py) = m.point.xy().expect("ensemble points are affine");
        ContextDesc {
            p: m.p(),
            a: m.curve.a(),
            b: m.curve.b(),
            px,
            py,
            d: spec.d,
            label: spec.label,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckRecord {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub context: Option<ContextDesc>,
}

#[derive(Debug, Serialize)]
pub struct VerifyReport {
    pub artifact: &'static str,
    pub version: &'static str,
    pub config_hash: String,
    pub contexts: usize,
    pub passed: bool,
    pub checks: Vec<CheckRecord>,
}

impl VerifyReport {
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            0
        } else {
            1
        }
    }
}

/// Runs every exact-identity suite over the configured ensemble.
pub fn run_verify(cfg: &ExperimentConfig) -> Result<VerifyReport> {
    let members = ensemble::generate(&cfg.ensemble)?;
    let specs: Vec<ModPCharSpec> = cfg
        .characters
        .specs
        .iter()
        .map(|s| parse_character_spec(s))
        .collect::<Result<_>>()?;
    // contexts where the character order divides p-1
    let mut pairs: Vec<(usize, ModPCharSpec)> = Vec::new();
    for (i, m) in members.iter().enumerate() {
        for &s in &specs {
            if (m.p() - 1) % s.d == 0 {
                pairs.push((i, s));
            }
        }
    }
    if pairs.is_empty() {
        bail!("no (curve, character) pair admits the configured orders");
    }
    let audit_n_cap = cfg.audit.audit_n.max(16);
    let limit = pairs
        .iter()
        .map(|(i, s)| (members[*i].order_info.point_order * s.d).min(audit_n_cap))
        .max()
        .unwrap()
        .max(cfg.audit.smooth_y)
        .max(2 * cfg.audit.interval_y as u64);
    let tables = SieveTables::build(limit)?;
    let intervals = [
        (2.0, 16.0),
        (16.0, 256.0),
        (cfg.audit.interval_x, cfg.audit.interval_y),
    ];

    let per_context = run_jobs(pairs.len(), cfg.output.workers, |idx| {
        let (mi, spec) = pairs[idx];
        let m = &members[mi];
        let desc = ContextDesc::new(m, spec);
        let mut records = Vec::new();
        let mut push = |c: checks::CheckOutcome| {
            records.push(CheckRecord {
                name: c.name,
                passed: c.passed,
                detail: c.detail,
                context: Some(desc.clone()),
            });
        };
        let chi = match CharacterModP::new(*m.curve.field(), spec.d, spec.label) {
            Ok(c) => c,
            Err(e) => {
                records.push(CheckRecord {
                    name: "context".into(),
                    passed: false,
                    detail: e.to_string(),
                    context: Some(desc.clone()),
                });
                return records;
            }
        };
        let ctx = match SumContext::new(&m.curve, m.point, chi, cfg.ensemble.epsilon, &m.group) {
            Ok(c) => c,
            Err(e) => {
                records.push(CheckRecord {
                    name: "context".into(),
                    passed: false,
                    detail: e.to_string(),
                    context: Some(desc.clone()),
                });
                return records;
            }
        };
        let mut rng = ChaCha12Rng::seed_from_u64(cfg.ensemble.seed ^ (idx as u64) << 32);
        let base = *ctx.base();
        let ord = ctx.order_info().point_order;
        let n_audit = ctx.r().min(audit_n_cap).min(tables.limit());
        push(checks::eds_identity(&base, &mut rng, 10_000, 1000));
        push(checks::engine_equivalence(&base, 10_000));
        push(checks::zero_locus(&base, ord, 3 * ord));
        push(checks::mult_formula(&base, 500));
        push(checks::transport_identity(&ctx, &mut rng, 1000));
        push(checks::periodicity(&ctx, &mut rng, 256));
        push(checks::partition_audit_check(
            &ctx,
            &Twist::TauNu(cfg.audit.nu),
            &tables,
            n_audit,
            &intervals,
        ));
        push(checks::moebius_audit_check(&ctx, &tables, n_audit));
        push(checks::smooth_agreement_check(
            &ctx,
            &tables,
            cfg.audit.smooth_y.min(n_audit).max(2),
            n_audit,
            cfg.audit.smooth_l0.min(n_audit).max(1),
        ));
        push(checks::progression_partition_check(&ctx, &tables, 6, n_audit));
        push(checks::progression_partition_check(
            &ctx,
            &tables,
            spec.d,
            n_audit,
        ));
        push(checks::complete_sum_trivial(&ctx));
        if ctx.r() <= 20_000 {
            let (outcome, _worst) = checks::weil_audit(&ctx, &mut rng, 6);
            push(outcome);
        }
        records.push(CheckRecord {
            name: "context".into(),
            passed: true,
            detail: format!("R = {}", ctx.r()),
            context: Some(desc),
        });
        records
    });

    let mut records: Vec<CheckRecord> = per_context.into_iter().flatten().collect();
    for m in &members {
        let c = checks::char_orthogonality(*m.curve.field(), &[3, 4, 5, 8, 12]);
        records.push(CheckRecord {
            name: c.name,
            passed: c.passed,
            detail: format!("p = {}: {}", m.p(), c.detail),
            context: None,
        });
        if m.p() <= 10_000 {
            let c = checks::legendre_agreement(*m.curve.field());
            records.push(CheckRecord {
                name: c.name,
                passed: c.passed,
                detail: c.detail,
                context: None,
            });
        }
    }
    let passed = records.iter().all(|r| r.passed);
    Ok(VerifyReport {
        artifact: "divchar",
        version: env!("CARGO_PKG_VERSION"),
        config_hash: cfg.hash(),
        contexts: pairs.len(),
        passed,
        checks: records,
    })
}

#[derive(Debug, Clone)]
struct SumJob {
    member: usize,
    spec: ModPCharSpec,
    twist: Twist,
    n_abs: Option<u64>,
    n_frac: Option<f64>,
    theorem: Option<Theorem>,
}

impl SumJob {
    fn resolve_n(&self, r: u64) -> u64 {
        match (self.n_abs, self.n_frac) {
            (Some(n), _) => n,
            (None, Some(f)) => ((r as f64 * f).floor() as u64).max(1),
            (None, None) => r,
        }
    }
}

fn schedule_entries(cfg: &ExperimentConfig) -> Vec<(Option<u64>, Option<f64>)> {
    let mut out: Vec<(Option<u64>, Option<f64>)> = cfg
        .schedule
        .n_values
        .iter()
        .map(|&n| (Some(n), None))
        .collect();
    out.extend(cfg.schedule.n_fractions.iter().map(|&f| (None, Some(f))));
    out
}

fn blank_row(m: &Member, spec: ModPCharSpec, twist: &str, n: u64) -> ReportRow {
    let (px, py) = m.point.xy().expect("ensemble points are affine");
    ReportRow {
        p: m.p(),
        a: m.curve.a(),
        b: m.curve.b(),
        px,
        py,
        d: spec.d,
        label: spec.label,
        ord_p: m.order_info.point_order,
        r: spec.d * m.order_info.point_order,
        twist: twist.to_string(),
        n,
        s_re: None,
        s_im: None,
        s_abs: None,
        zero_count: None,
        theorem: None,
        rhs: None,
        ratio: None,
        flags: String::new(),
        ms: 0,
    }
}

fn fill_sum(row: &mut ReportRow, s: &divchar::sums::SumResult) {
    let (re, im) = s.complex();
    row.s_re = Some(re);
    row.s_im = Some(im);
    row.s_abs = Some(s.abs());
    row.zero_count = Some(s.zero_count());
}

/// Builds the context for a job, or an error-flagged row.
fn job_context(m: &Member, spec: ModPCharSpec, epsilon: f64) -> Result<SumContext, String> {
    if (m.p() - 1) % spec.d != 0 {
        return Err("error=InvalidOrder".into());
    }
    let chi = CharacterModP::new(*m.curve.field(), spec.d, spec.label)
        .map_err(|e| format!("error={e}"))?;
    SumContext::new(&m.curve, m.point, chi, epsilon, &m.group).map_err(|e| match e {
        SumsError::SmallOrder(_) => "error=SmallOrder".into(),
        other => format!("error={other}"),
    })
}

/// One row per (curve, point, character, twist, N).
pub fn run_sum(cfg: &ExperimentConfig) -> Result<Vec<ReportRow>> {
    let members = ensemble::generate(&cfg.ensemble)?;
    let specs: Vec<ModPCharSpec> = cfg
        .characters
        .specs
        .iter()
        .map(|s| parse_character_spec(s))
        .collect::<Result<_>>()?;
    let twists: Vec<Twist> = cfg
        .twists
        .specs
        .iter()
        .map(|s| parse_twist_spec(s))
        .collect::<Result<_>>()?;
    let mut jobs = Vec::new();
    for (mi, _) in members.iter().enumerate() {
        for &spec in &specs {
            for twist in &twists {
                for (n_abs, n_frac) in schedule_entries(cfg) {
                    jobs.push(SumJob {
                        member: mi,
                        spec,
                        twist: twist.clone(),
                        n_abs,
                        n_frac,
                        theorem: None,
                    });
                }
            }
        }
    }
    let limit = sieve_limit_for(&jobs, &members, cfg)?;
    let tables = SieveTables::build(limit)?;
    let opts = SumOpts {
        allow_beyond_r: cfg.schedule.override_range,
        workers: 1,
    };
    let rows = run_jobs(jobs.len(), cfg.output.workers, |i| {
        let job = &jobs[i];
        let m = &members[job.member];
        let r = job.spec.d * m.order_info.point_order;
        let n = job.resolve_n(r);
        let mut row = blank_row(m, job.spec, &job.twist.to_string(), n);
        let started = Instant::now();
        match job_context(m, job.spec, cfg.ensemble.epsilon) {
            Ok(ctx) => match sum_s(&ctx, &job.twist, &tables, n, opts) {
                Ok(s) => fill_sum(&mut row, &s),
                Err(SumsError::RangeExceedsR { .. }) => row.flags = "error=RangeExceedsR".into(),
                Err(e) => row.flags = format!("error={e}"),
            },
            Err(flag) => row.flags = flag,
        }
        row.ms = started.elapsed().as_millis() as u64;
        row
    });
    Ok(rows)
}

fn sieve_limit_for(
    jobs: &[SumJob],
    members: &[Member],
    cfg: &ExperimentConfig,
) -> Result<u64> {
    let mut limit = 16u64.max(cfg.audit.smooth_y);
    for job in jobs {
        let r = job.spec.d * members[job.member].order_info.point_order;
        limit = limit.max(job.resolve_n(r));
    }
    if limit > SIEVE_CAP {
        bail!("schedule needs sieve tables up to {limit}, beyond the cap {SIEVE_CAP}");
    }
    Ok(limit)
}

fn dirichlet_twist(cfg: &ExperimentConfig) -> Result<Twist> {
    for s in &cfg.twists.specs {
        if s.starts_with("dirichlet:") {
            return parse_twist_spec(s);
        }
    }
    parse_twist_spec("dirichlet:q=4,exp=1")
}

fn theorem_twist(cfg: &ExperimentConfig, t: Theorem) -> Result<Twist> {
    Ok(match t {
        Theorem::TauBounded => Twist::TauNu(cfg.audit.nu),
        Theorem::DirichletTwist => dirichlet_twist(cfg)?,
        Theorem::SquarefreeTwist => Twist::MoebiusSq,
        Theorem::SmoothTwist => Twist::Smooth(cfg.audit.smooth_y),
    })
}

fn smooth_params_any_y(n: u64, y: u64, tables: &SieveTables) -> SmoothParams {
    let psi_count = (1..=n).filter(|&k| tables.is_smooth(k, y)).count() as u64;
    let alpha = (1.0 + y as f64 / (n as f64).ln()).ln() / (y as f64).ln();
    SmoothParams {
        n,
        y,
        alpha,
        psi_count,
    }
}

/// Upper-bounds the scan's work (order scans plus stream steps) from the
/// config alone, so oversized runs are refused before any O(p) scan starts.
fn scan_cost_upper_bound(cfg: &ExperimentConfig) -> Result<u64> {
    let mut curve_ps: Vec<u64> = vec![cfg.ensemble.prime_max; cfg.ensemble.curve_count as usize];
    for fx in &cfg.ensemble.curves {
        curve_ps.push(crate::config::parse_fixture(fx)?.0);
    }
    let d_max = cfg
        .characters
        .specs
        .iter()
        .map(|s| parse_character_spec(s).map(|m| m.d))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .max()
        .unwrap_or(2);
    let entries = schedule_entries(cfg);
    let specs = cfg.characters.specs.len() as u64;
    let mut estimated = 0u64;
    for &p in &curve_ps {
        estimated = estimated.saturating_add(p); // group-order scan
        let r_max = d_max * (p + 1 + 2 * ((p as f64).sqrt().ceil() as u64));
        for t in &cfg.audit.theorems {
            let weight = if t == "1.3" { 3u64 } else { 1 };
            for (n_abs, n_frac) in &entries {
                let n = match (n_abs, n_frac) {
                    (Some(n), _) => *n,
                    (None, Some(f)) => (r_max as f64 * f).ceil() as u64,
                    (None, None) => r_max,
                };
                estimated = estimated.saturating_add(weight.saturating_mul(n).saturating_mul(specs));
            }
        }
    }
    Ok(estimated)
}

/// Bound-ratio rows for the selected families; the squarefree family also
/// emits its threshold-split partial sums as extra rows.
pub fn run_scan(cfg: &ExperimentConfig) -> Result<Vec<ReportRow>> {
    let estimated = scan_cost_upper_bound(cfg)?;
    if estimated > cfg.audit.cost_ceiling {
        bail!(
            "estimated work {estimated} exceeds the cost ceiling {} (raise audit.cost_ceiling to proceed)",
            cfg.audit.cost_ceiling
        );
    }
    let members = ensemble::generate(&cfg.ensemble)?;
    let specs: Vec<ModPCharSpec> = cfg
        .characters
        .specs
        .iter()
        .map(|s| parse_character_spec(s))
        .collect::<Result<_>>()?;
    let theorems: Vec<Theorem> = cfg
        .audit
        .theorems
        .iter()
        .map(|t| Theorem::from_label(t).expect("validated"))
        .collect();
    let mut jobs = Vec::new();
    for (mi, _) in members.iter().enumerate() {
        for &spec in &specs {
            for &theorem in &theorems {
                for (n_abs, n_frac) in schedule_entries(cfg) {
                    jobs.push(SumJob {
                        member: mi,
                        spec,
                        twist: theorem_twist(cfg, theorem)?,
                        n_abs,
                        n_frac,
                        theorem: Some(theorem),
                    });
                }
            }
        }
    }
    let limit = sieve_limit_for(&jobs, &members, cfg)?;
    let tables = SieveTables::build(limit)?;
    let opts = SumOpts {
        allow_beyond_r: cfg.schedule.override_range,
        workers: 1,
    };
    let row_groups = run_jobs(jobs.len(), cfg.output.workers, |i| {
        let job = &jobs[i];
        let m = &members[job.member];
        let theorem = job.theorem.expect("scan jobs carry a theorem");
        let r = job.spec.d * m.order_info.point_order;
        let n = job.resolve_n(r);
        let mut row = blank_row(m, job.spec, &job.twist.to_string(), n);
        row.theorem = Some(theorem.label().to_string());
        let started = Instant::now();
        let mut extra_rows = Vec::new();
        match job_context(m, job.spec, cfg.ensemble.epsilon) {
            Ok(ctx) => {
                let smooth = match theorem {
                    Theorem::SmoothTwist => {
                        Some(smooth_params_any_y(n, cfg.audit.smooth_y, &tables))
                    }
                    _ => None,
                };
                let params = BoundParams {
                    p: ctx.p(),
                    r: ctx.r(),
                    n,
                    epsilon: cfg.ensemble.epsilon,
                    nu: job.twist.tau_bound_nu(),
                    smooth,
                };
                let bound = bound_rhs(theorem, &params);
                match sum_s(&ctx, &job.twist, &tables, n, opts) {
                    Ok(s) => {
                        let s = s.with_bound(bound.rhs);
                        fill_sum(&mut row, &s);
                        row.rhs = s.bound_rhs;
                        row.ratio = s.ratio;
                        row.flags = flags_string(&bound.flags, &[]);
                    }
                    Err(SumsError::RangeExceedsR { .. }) => {
                        row.flags = flags_string(&bound.flags, &["error=RangeExceedsR".into()])
                    }
                    Err(e) => row.flags = format!("error={e}"),
                }
                if matches!(theorem, Theorem::SquarefreeTwist) && n <= ctx.r() {
                    if let Ok(audit) = moebius_sq_audit(&ctx, &tables, n, opts) {
                        for (tag, part) in [("mu2:T1", &audit.t1), ("mu2:T2", &audit.t2)] {
                            let mut extra = blank_row(m, job.spec, tag, n);
                            extra.theorem = Some(theorem.label().to_string());
                            let (re, im) = part.complex();
                            extra.s_re = Some(re);
                            extra.s_im = Some(im);
                            extra.s_abs = Some(part.abs());
                            extra.zero_count = Some(part.zero_count());
                            extra.flags = format!(
                                "gcd_threshold={:.3};identity={}",
                                audit.gcd_threshold,
                                u8::from(audit.identity_holds())
                            );
                            extra_rows.push(extra);
                        }
                    }
                }
            }
            Err(flag) => row.flags = flag,
        }
        row.ms = started.elapsed().as_millis() as u64;
        let mut group = vec![row];
        group.extend(extra_rows);
        group
    });
    Ok(row_groups.into_iter().flatten().collect())
}
