mod config;

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use quadmoment_core::density::{
    identity_check, predicted_correlation, predicted_inner, predicted_mean, predicted_mean_conjectural,
    predicted_mean_dual,
};
use quadmoment_core::experiments::{
    correlation_run, mean_square_run, verify_disc_twist, ExperimentReport, RunOptions, IMAG_CUTOFF_LIMIT,
    REAL_CUTOFF_LIMIT,
};
use quadmoment_core::localdata::{ArchClass, STuple};
use quadmoment_core::orbitcount::{
    epsilon_closed_form, epsilon_from_orbit, orbit_report, ramified_coefficients, stabilizer_congruence_count,
    standard_tasks, volume_from_stabilizer, LocalType, OrbitOptions, OrbitReport,
};
use quadmoment_core::quadfields::{enumerate_discs, format_sig12, hR, real_records, sieve_class_numbers_imag, HRCache};
use quadmoment_core::Error;
use serde_json::json;

use config::{parse_count, ConfigFile};

#[derive(Parser)]
#[command(name = "quadmoment", version, about = "Density constants, local orbit counts and class-number experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mean value constant of (hR)^2 over the family.
    PredictMean(Opts),
    /// Correlation constant and its mean, dual mean and inner-product factors.
    PredictCor(Opts),
    /// Empirical mean of (hR)^2 / X^2.
    RunMean(Opts),
    /// Empirical correlation between a field and its dual.
    RunCor(Opts),
    /// Empirical inner product sum h R h* R* / X^2.
    RunInner(Opts),
    /// Orbit counts for local densities.
    VerifyLocal(Opts),
    /// Stabilizer congruence counts for ramified representatives.
    VerifyStab(Opts),
    /// Discriminant twist law over the family.
    VerifyTwist(Opts),
    /// Class number and regulator of single fields.
    Hr(Opts),
    /// Class numbers and regulators of a whole family.
    Sieve(Opts),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Csv,
}

impl std::str::FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        <Format as ValueEnum>::from_str(s, true)
    }
}

#[derive(Args, Clone, Debug, Default)]
struct Opts {
    /// S-tuple, e.g. "inf=C;3=rm;7=sp"
    #[arg(long = "s")]
    s: Option<String>,
    /// Fundamental discriminant of the auxiliary field
    #[arg(long, allow_hyphen_values = true)]
    m: Option<i64>,
    /// Cutoffs, comma separated (1e5 and 10^5 accepted)
    #[arg(long, value_delimiter = ',', value_parser = parse_count)]
    x: Option<Vec<u64>>,
    /// Euler products run over primes up to this bound
    #[arg(long, value_parser = parse_count)]
    primes: Option<u64>,
    /// h/R cache file (QUADMOMENT_CACHE overrides the config file)
    #[arg(long)]
    cache: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long)]
    threads: Option<usize>,
    /// Memory cap for orbit searches, in MiB
    #[arg(long = "mem-cap")]
    mem_cap: Option<u64>,
    /// Lift the cutoff cost guards
    #[arg(long = "override")]
    override_guard: bool,
    /// Allow S-tuples with fewer than two field places (labelled CONJECTURAL)
    #[arg(long)]
    conjectural: bool,
    /// Directory for CSV output and the run manifest
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    p: Option<u64>,
    /// Local type: ur-sp, ur-ur, ur-rm, rm-ur, rm-rm
    #[arg(long)]
    class: Option<String>,
    #[arg(long)]
    n: Option<u32>,
    #[arg(long)]
    delta: Option<u32>,
    /// Discriminants, comma separated
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    d: Option<Vec<i64>>,
    /// key=value file; command-line flags take precedence
    #[arg(long)]
    config: Option<PathBuf>,
}

/// Fully resolved options.
struct Settings {
    s: Option<String>,
    m: Option<i64>,
    x: Option<Vec<u64>>,
    primes: u64,
    cache: Option<PathBuf>,
    format: Format,
    threads: Option<usize>,
    mem_cap_mib: Option<u64>,
    override_guard: bool,
    conjectural: bool,
    out: Option<PathBuf>,
    p: Option<u64>,
    class: Option<String>,
    n: Option<u32>,
    delta: Option<u32>,
    d: Option<Vec<i64>>,
}

impl Settings {
    fn resolve(o: Opts) -> Result<Self, String> {
        let cfg = match &o.config {
            Some(p) => ConfigFile::load(p)?,
            None => ConfigFile::default(),
        };
        let cache = match o.cache {
            Some(c) => Some(c),
            None => match std::env::var_os("QUADMOMENT_CACHE") {
                Some(v) if !v.is_empty() => Some(PathBuf::from(v)),
                _ => cfg.pick(None::<PathBuf>, "cache")?,
            },
        };
        let d = match o.d {
            Some(d) => Some(d),
            None => cfg
                .values
                .get("d")
                .map(|v| v.split(',').map(|t| t.trim().parse::<i64>().map_err(|e| format!("config key `d`: {e}"))).collect())
                .transpose()?,
        };
        Ok(Settings {
            s: cfg.pick(o.s, "s")?,
            m: cfg.pick(o.m, "m")?,
            x: cfg.counts(o.x, "x")?,
            primes: match o.primes {
                Some(p) => p,
                None => cfg.values.get("primes").map(|v| parse_count(v)).transpose()?.unwrap_or(100_000),
            },
            cache,
            format: cfg.pick(o.format, "format")?.unwrap_or(Format::Text),
            threads: cfg.pick(o.threads, "threads")?,
            mem_cap_mib: cfg.pick(o.mem_cap, "mem-cap")?,
            override_guard: cfg.flag(o.override_guard, "override")?,
            conjectural: cfg.flag(o.conjectural, "conjectural")?,
            out: cfg.pick(o.out, "out")?,
            p: cfg.pick(o.p, "p")?,
            class: cfg.pick(o.class, "class")?,
            n: cfg.pick(o.n, "n")?,
            delta: cfg.pick(o.delta, "delta")?,
            d,
        })
    }

    fn stuple(&self) -> Result<STuple, Fail> {
        let text = self.s.as_deref().ok_or_else(|| Fail::Usage("missing --s".into()))?;
        let s: STuple = text.parse().map_err(Fail::Core)?;
        s.validate().map_err(Fail::Core)?;
        Ok(s)
    }

    fn m(&self) -> Result<i64, Fail> {
        self.m.ok_or_else(|| Fail::Usage("missing --m".into()))
    }

    fn cutoffs(&self) -> Result<Vec<u64>, Fail> {
        self.x.clone().ok_or_else(|| Fail::Usage("missing --x".into()))
    }

    fn run_options(&self) -> RunOptions {
        RunOptions { prime_bound: self.primes, override_guard: self.override_guard, allow_conjectural: self.conjectural }
    }

    fn orbit_options(&self) -> OrbitOptions {
        let mut o = OrbitOptions::default();
        if let Some(m) = self.mem_cap_mib {
            o.mem_cap_bytes = m << 20;
        }
        o
    }

    fn open_cache(&self) -> Result<HRCache, Fail> {
        match &self.cache {
            Some(p) => HRCache::open(p).map_err(Fail::Core),
            None => Ok(HRCache::in_memory()),
        }
    }
}

enum Fail {
    Usage(String),
    Core(Error),
}

impl Fail {
    fn code(&self) -> u8 {
        match self {
            Fail::Usage(_) => 2,
            Fail::Core(Error::Hypothesis(_) | Error::Invalid(_) | Error::Parse { .. } | Error::Guard(_)) => 2,
            Fail::Core(_) => 1,
        }
    }

    fn message(&self) -> String {
        match self {
            Fail::Usage(m) => m.clone(),
            Fail::Core(e) => e.to_string(),
        }
    }
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

/// What a verb produced: the printed body, its file name under `--out`, and named checks.
struct Output {
    body: String,
    file: &'static str,
    checks: Vec<(String, bool)>,
}

impl Output {
    fn new(body: String, file: &'static str) -> Self {
        Output { body, file, checks: Vec::new() }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (verb, opts) = match cli.cmd {
        Command::PredictMean(o) => ("predict-mean", o),
        Command::PredictCor(o) => ("predict-cor", o),
        Command::RunMean(o) => ("run-mean", o),
        Command::RunCor(o) => ("run-cor", o),
        Command::RunInner(o) => ("run-inner", o),
        Command::VerifyLocal(o) => ("verify-local", o),
        Command::VerifyStab(o) => ("verify-stab", o),
        Command::VerifyTwist(o) => ("verify-twist", o),
        Command::Hr(o) => ("hr", o),
        Command::Sieve(o) => ("sieve", o),
    };
    let raw = format!("{opts:?}");
    let settings = match Settings::resolve(opts) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(t) = settings.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    let start = Instant::now();
    let result = dispatch(verb, &settings);
    let elapsed = start.elapsed().as_secs_f64();
    let (code, checks) = match &result {
        Ok(out) => {
            print!("{}", out.body);
            let failed: Vec<&str> = out.checks.iter().filter(|c| !c.1).map(|c| c.0.as_str()).collect();
            if failed.is_empty() {
                (0u8, out.checks.clone())
            } else {
                eprintln!("check failed: {}", failed.join(", "));
                (1, out.checks.clone())
            }
        }
        Err(f) => {
            eprintln!("error: {}", f.message());
            (f.code(), Vec::new())
        }
    };
    if let Some(dir) = &settings.out {
        if let Err(e) = write_artifacts(dir, verb, &raw, &result, &checks, elapsed, code) {
            eprintln!("error: writing {}: {e}", dir.display());
            return ExitCode::from(1);
        }
    }
    ExitCode::from(code)
}

fn write_artifacts(
    dir: &std::path::Path,
    verb: &str,
    raw: &str,
    result: &Result<Output, Fail>,
    checks: &[(String, bool)],
    elapsed: f64,
    code: u8,
) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    if let Ok(out) = result {
        std::fs::write(dir.join(out.file), &out.body)?;
    }
    let manifest = json!({
        "tool": "quadmoment",
        "version": env!("CARGO_PKG_VERSION"),
        "verb": verb,
        "inputs": raw,
        "elapsed_seconds": elapsed,
        "checks": checks.iter().map(|(n, ok)| json!({"name": n, "passed": ok})).collect::<Vec<_>>(),
        "error": result.as_ref().err().map(|f| f.message()),
        "exit_code": code,
    });
    std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")
}

fn dispatch(verb: &str, st: &Settings) -> Result<Output, Fail> {
    match verb {
        "predict-mean" => predict_mean(st),
        "predict-cor" => predict_cor(st),
        "run-mean" => run_mean(st),
        "run-cor" | "run-inner" => run_cor(st, verb == "run-inner"),
        "verify-local" => verify_local(st),
        "verify-stab" => verify_stab(st),
        "verify-twist" => verify_twist(st),
        "hr" => hr(st),
        "sieve" => sieve(st),
        _ => Err(Fail::Usage(format!("unknown verb {verb}"))),
    }
}

fn predict_mean(st: &Settings) -> Result<Output, Fail> {
    let s = st.stuple()?;
    let est = if s.field_place_count() < 2 && st.conjectural {
        predicted_mean_conjectural(&s, st.primes)?
    } else {
        predicted_mean(&s, st.primes)?
    };
    let body = match st.format {
        Format::Json => serde_json::to_string_pretty(&est.to_json()).expect("json") + "\n",
        _ => est.to_kv(),
    };
    Ok(Output::new(body, "predict-mean.txt"))
}

fn predict_cor(st: &Settings) -> Result<Output, Fail> {
    let s = st.stuple()?;
    let m = st.m()?;
    let cor = predicted_correlation(m, &s, st.primes)?;
    let mean = predicted_mean(&s, st.primes)?;
    let dual = predicted_mean_dual(m, &s, st.primes)?;
    let inner = predicted_inner(m, &s, st.primes)?;
    let id = identity_check(m, &s, st.primes)?;
    let consistent = id.rel_discrepancy <= id.combined_tail;
    let body = match st.format {
        Format::Json => {
            let v = json!({
                "correlation": cor.to_json(),
                "mean": mean.to_json(),
                "mean_dual": dual.to_json(),
                "inner": inner.to_json(),
                "identity": id,
            });
            serde_json::to_string_pretty(&v).expect("json") + "\n"
        }
        _ => {
            let mut b = String::new();
            for e in [&cor, &mean, &dual, &inner] {
                b += &e.to_kv();
                b.push('\n');
            }
            let _ = writeln!(
                b,
                "identity_ratio={:.15e}\nidentity_rel_discrepancy={:.3e}\nidentity_combined_tail={:.3e}",
                id.ratio, id.rel_discrepancy, id.combined_tail
            );
            b
        }
    };
    let mut out = Output::new(body, "predict-cor.txt");
    out.checks.push(("identity within combined tail".into(), consistent));
    Ok(out)
}

fn report_body(r: &ExperimentReport, format: Format) -> String {
    match format {
        Format::Json => serde_json::to_string_pretty(r).expect("json") + "\n",
        _ => r.to_csv(),
    }
}

fn warn(r: &ExperimentReport) {
    if let Some(l) = &r.label {
        eprintln!("note: {l}");
    }
    for w in &r.warnings {
        eprintln!("warning: {w}");
    }
}

fn run_mean(st: &Settings) -> Result<Output, Fail> {
    let s = st.stuple()?;
    let x = st.cutoffs()?;
    let mut cache = st.open_cache()?;
    let r = mean_square_run(&s, &x, &mut cache, &st.run_options())?;
    cache.save()?;
    warn(&r);
    Ok(Output::new(report_body(&r, st.format), "run-mean.csv"))
}

fn run_cor(st: &Settings, inner_only: bool) -> Result<Output, Fail> {
    let s = st.stuple()?;
    let m = st.m()?;
    let x = st.cutoffs()?;
    let mut cache = st.open_cache()?;
    let r = correlation_run(m, &s, &x, &mut cache, &st.run_options())?;
    cache.save()?;
    warn(&r.correlation);
    if inner_only {
        return Ok(Output::new(report_body(&r.inner, st.format), "run-inner.csv"));
    }
    let body = match st.format {
        Format::Json => serde_json::to_string_pretty(&r).expect("json") + "\n",
        _ => {
            let mut b = String::from("statistic,");
            b += r.mean.to_csv().lines().next().unwrap_or("");
            b.push('\n');
            for rep in [&r.mean, &r.mean_dual, &r.inner, &r.correlation] {
                for line in rep.to_csv().lines().skip(1) {
                    let _ = writeln!(b, "{},{line}", rep.statistic);
                }
            }
            b
        }
    };
    Ok(Output::new(body, "run-cor.csv"))
}

fn orbit_json(r: &OrbitReport) -> serde_json::Value {
    json!({
        "p": r.p,
        "n": r.n,
        "class": r.class.to_string(),
        "orbit_size": r.orbit_size,
        "volume": r.volume.to_string(),
        "epsilon": r.epsilon_expected.to_string(),
        "relation_factor": r.relation_factor.to_string(),
        "status": r.status,
    })
}

fn verify_local(st: &Settings) -> Result<Output, Fail> {
    let opts = st.orbit_options();
    let tasks: Vec<(u64, LocalType, Option<u32>)> = match (st.p, &st.class) {
        (Some(p), Some(c)) => vec![(p, c.parse()?, st.n)],
        (None, None) if st.n.is_none() => standard_tasks().into_iter().map(|(p, c)| (p, c, None)).collect(),
        _ => return Err(Fail::Usage("verify-local takes both --p and --class, or neither".into())),
    };
    let single = tasks.len() == 1;
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    for (p, class, n) in tasks {
        let res = match n {
            Some(n) => orbit_report(p, n, class, &opts),
            None => epsilon_from_orbit(p, class, &opts),
        };
        match res {
            Ok(r) => {
                checks.push((format!("{p} {class}"), true));
                rows.push(Ok(r));
            }
            // a single explicit request surfaces its own error and exit code
            Err(e) if single => return Err(e.into()),
            Err(e @ Error::Guard(_)) => rows.push(Err((p, class, n, "SKIPPED".to_string(), e))),
            Err(e) => {
                checks.push((format!("{p} {class}"), false));
                rows.push(Err((p, class, n, "FAILED".to_string(), e)));
            }
        }
    }
    let body = match st.format {
        Format::Json => {
            let v: Vec<serde_json::Value> = rows
                .iter()
                .map(|r| match r {
                    Ok(r) => orbit_json(r),
                    Err((p, c, n, status, e)) => {
                        json!({"p": p, "n": n, "class": c.to_string(), "status": status, "error": e.to_string()})
                    }
                })
                .collect();
            serde_json::to_string_pretty(&v).expect("json") + "\n"
        }
        _ => {
            let mut b = String::from(OrbitReport::CSV_HEADER);
            b.push('\n');
            for r in &rows {
                match r {
                    Ok(r) => b += &(r.to_csv() + "\n"),
                    Err((p, c, n, status, e)) => {
                        eprintln!("{p} {c}: {e}");
                        let n = n.map(|n| n.to_string()).unwrap_or_default();
                        let _ = writeln!(b, "{p},{n},{c},,,,,,,{status}");
                    }
                }
            }
            b
        }
    };
    Ok(Output { body, file: "verify-local.csv", checks })
}

fn verify_stab(st: &Settings) -> Result<Output, Fail> {
    let cases: Vec<(u64, u32)> = match (st.p, st.delta) {
        (Some(p), Some(d)) => vec![(p, d)],
        (Some(p), None) if p != 2 => vec![(p, 1)],
        (None, None) => vec![(3, 1), (5, 1), (7, 1), (2, 2), (2, 3)],
        _ => return Err(Fail::Usage("verify-stab needs --p (and --delta at p = 2)".into())),
    };
    let mut b = String::from("p,delta,n,a1,a2,count,expected,volume,epsilon,status\n");
    let mut checks = Vec::new();
    for (p, delta) in cases {
        let (a1, a2, level) = ramified_coefficients(p, delta)?;
        let n = st.n.unwrap_or(level);
        if n < level {
            return Err(Fail::Usage(format!("level n={n} below {level} for p={p}, delta={delta}")));
        }
        let count = stabilizer_congruence_count(p, n, a1, a2)?;
        let expected = 2 * p.pow(delta);
        let vol = volume_from_stabilizer(p, n, count);
        let eps = epsilon_closed_form(p, LocalType::UrRm, delta);
        let ok = count == expected && vol == eps;
        let _ = writeln!(
            b,
            "{p},{delta},{n},{a1},{a2},{count},{expected},{vol},{eps},{}",
            if ok { "ok" } else { "FAILED" }
        );
        checks.push((format!("stabilizer p={p} delta={delta}"), ok));
    }
    if st.format == Format::Text {
        for line in b.lines().skip(1) {
            let f: Vec<&str> = line.split(',').collect();
            eprintln!("p={} delta={}: count {} vs expected {}", f[0], f[1], f[5], f[6]);
        }
    }
    Ok(Output { body: b, file: "verify-stab.csv", checks })
}

fn verify_twist(st: &Settings) -> Result<Output, Fail> {
    let s = st.stuple()?;
    let m = st.m()?;
    let x = *st.cutoffs()?.iter().max().ok_or_else(|| Fail::Usage("empty --x".into()))?;
    let r = verify_disc_twist(m, &s, x)?;
    let body = match st.format {
        Format::Json => serde_json::to_string_pretty(&r).expect("json") + "\n",
        _ => {
            let mut b = format!("m={}\nconfig={}\nx={}\nchecked={}\ncounterexamples={}\n", r.m, r.config, r.x, r.checked, r.counterexamples.len());
            for (d, ds, want) in &r.counterexamples {
                let _ = writeln!(b, "counterexample d={d} d*={ds} expected |d*|={want}");
            }
            b
        }
    };
    let mut out = Output::new(body, "verify-twist.txt");
    out.checks.push(("twist law".into(), r.counterexamples.is_empty()));
    Ok(out)
}

fn records_csv(recs: &[(i64, u64, f64)]) -> String {
    let mut b = String::from("d,h,R\n");
    for (d, h, r) in recs {
        let _ = writeln!(b, "{d},{h},{}", format_sig12(*r));
    }
    b
}

fn hr(st: &Settings) -> Result<Output, Fail> {
    let ds = st.d.clone().ok_or_else(|| Fail::Usage("missing --d".into()))?;
    let mut cache = st.open_cache()?;
    let mut recs = Vec::new();
    for d in ds {
        let r = hR(d, &mut cache)?;
        recs.push((r.d, r.h, r.r));
    }
    cache.save()?;
    Ok(Output::new(records_csv(&recs), "hr.csv"))
}

fn sieve(st: &Settings) -> Result<Output, Fail> {
    let s: STuple = match &st.s {
        Some(_) => st.stuple()?,
        None => STuple::new(ArchClass::CC),
    };
    let x = *st.cutoffs()?.iter().max().ok_or_else(|| Fail::Usage("empty --x".into()))?;
    let imag = s.arch == ArchClass::CC;
    let limit = if imag { IMAG_CUTOFF_LIMIT } else { REAL_CUTOFF_LIMIT };
    if x > limit && !st.override_guard {
        return Err(Error::Guard(format!("cutoff {x} exceeds {limit}; pass --override to proceed")).into());
    }
    let discs = enumerate_discs(x, &s);
    let recs: Vec<(i64, u64, f64)> = if imag {
        let table = sieve_class_numbers_imag(x.max(4));
        discs
            .iter()
            .map(|&d| (d, table.get(d.unsigned_abs()).expect("fundamental discriminant in table") as u64, 1.0))
            .collect()
    } else {
        let mut cache = st.open_cache()?;
        let r = real_records(&discs, &mut cache)?;
        cache.save()?;
        r.iter().map(|r| (r.d, r.h, r.r)).collect()
    };
    Ok(Output::new(records_csv(&recs), "sieve.csv"))
}
