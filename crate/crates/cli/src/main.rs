use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anisogauge::exec;
use anisogauge::inequalities::{CheckId, Status};
use anisogauge::runner::{self, CheckSelection, RunConfig};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "anisogauge", version, about = "Numerical checks of anisotropic Hardy, Sobolev and Morrey inequalities")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print S_{n,F}, sigma_F, omega_n and the Wulff volume of every gauge.
    Constants(Common),
    /// Dump d_F on the grid of every (gauge, domain) pair.
    DistanceField(Common),
    /// Run the configured checks and write the CSV and JSON reports.
    Verify(Common),
    /// Run only the positivity and feeble-regularity probes.
    Probe(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Worker threads; 0 uses all cores.
    #[arg(long, env = "ANISOGAUGE_THREADS", default_value_t = 0)]
    threads: usize,
    /// Extra dyadic grid refinements used to judge the stability of empirical constants.
    #[arg(long)]
    refine: Option<u32>,
}

impl Common {
    fn load(&self) -> anisogauge::Result<RunConfig> {
        let mut cfg = RunConfig::from_path(&self.config)?;
        if let Some(k) = self.refine {
            cfg.refine = k;
        }
        Ok(cfg)
    }
}

fn constants(cfg: &RunConfig) -> anisogauge::Result<i32> {
    for (g, c) in runner::compute_constants(cfg)? {
        let sigma = c.sigma_f.map_or_else(|| "inf".to_string(), |s| format!("{s:.9}"));
        println!(
            "{}: S_nF = {:.6}  sigma_F = {}  omega_n = {:.6}  wulff_volume = {:.6}",
            g.label(),
            c.s_nf,
            sigma,
            c.omega_n,
            c.wulff_volume
        );
        if let Some(note) = &c.sigma_f_note {
            println!("  sigma_F note: {note}");
        }
    }
    Ok(0)
}

fn distance_field(cfg: &RunConfig, out: &Path) -> anisogauge::Result<i32> {
    for path in runner::dump_distance_fields(cfg, out)? {
        println!("{}", path.display());
    }
    Ok(0)
}

fn verify(cfg: &RunConfig, out: &Path) -> anisogauge::Result<i32> {
    let report = runner::run(cfg)?;
    for r in report.failures() {
        eprintln!(
            "FAIL {} gauge={} domain={} p={} alpha={} function={} lhs={:e} rhs={:e} ratio={}",
            r.check_id.name(),
            r.gauge,
            r.domain,
            r.p,
            r.alpha,
            r.function,
            r.lhs,
            r.rhs,
            r.ratio.map_or("-".to_string(), |x| format!("{x:.6}"))
        );
    }
    let (csv, json) = runner::write_reports(cfg, &report, out)?;
    if cfg.output.dump_fields {
        runner::dump_distance_fields(cfg, out)?;
    }
    println!(
        "{} rows, {} fail, {} expected violations; wrote {} and {}",
        report.rows.len(),
        report.failures().len(),
        report.count(|s| *s == Status::ExpectedViolation),
        csv.display(),
        json.display()
    );
    Ok(report.exit_code())
}

fn probe(cfg: &RunConfig, out: &Path) -> anisogauge::Result<i32> {
    let mut cfg = cfg.clone();
    cfg.checks = CheckSelection::List(vec![CheckId::Positivity, CheckId::FeebleRegularity]);
    cfg.refine = 0;
    let report = runner::run(&cfg)?;
    for r in &report.rows {
        let line = format!(
            "{} gauge={} domain={} p={} alpha={} value={:.6e} witness={} status={}",
            r.check_id.name(),
            r.gauge,
            r.domain,
            r.p,
            r.alpha,
            r.lhs,
            r.function,
            r.status.label()
        );
        if r.status == Status::Fail {
            eprintln!("FAIL {line}");
        } else {
            println!("{line}");
        }
    }
    runner::write_reports(&cfg, &report, out)?;
    Ok(report.exit_code())
}

fn dispatch(command: &Command) -> anisogauge::Result<i32> {
    let (common, run): (&Common, fn(&RunConfig, &Path) -> anisogauge::Result<i32>) = match command {
        Command::Constants(c) => (c, |cfg, _| constants(cfg)),
        Command::DistanceField(c) => (c, distance_field),
        Command::Verify(c) => (c, verify),
        Command::Probe(c) => (c, probe),
    };
    let cfg = common.load()?;
    let out = common.out_dir.clone();
    exec::with_threads(common.threads, move || run(&cfg, &out))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
    }
}
