use std::collections::BTreeMap;
use std::fs;

use contactkit::bundle::{classify_many, Point, Section, StrataTolerances};
use contactkit::dynamics::{
    flow, frequencies, loop_integral, CoordinateCircle, FlowOptions, Output, QuadratureOptions,
};
use contactkit::expr::Expression;
use contactkit::models::{self, Model};
use contactkit::par::Execution;
use contactkit::sampling::uniform_in;
use contactkit::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::args::{BuiltIn, Command, CommonArgs, Format, ModelSource, OutputSpec, RunConfig, Tolerances};
use crate::output::{coordinate_columns, csv_line, emit, emit_sidecar, num, to_json};

pub const EXIT_INPUT: u8 = 1;
pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_INTEGRATOR: u8 = 3;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self::input(message)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Validation { .. } => EXIT_VALIDATION,
            Error::StepSizeUnderflow { .. } | Error::LeftAtlas { .. } | Error::AtTime { .. } => EXIT_INTEGRATOR,
            _ => EXIT_INPUT,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

struct Run<'a> {
    args: &'a CommonArgs,
    cfg: RunConfig,
    model: Model,
}

fn default_omegas(n: usize) -> Vec<f64> {
    (1..=n).map(|j| (j as f64).sqrt()).collect()
}

fn load_model(a: &CommonArgs, check_only: bool) -> Result<(Model, ModelSource), Failure> {
    if let Some(path) = &a.config {
        let text = fs::read_to_string(path).map_err(|e| Failure::io(format!("cannot read {}: {e}", path.display())))?;
        let model = if check_only {
            models::from_config_unchecked(&text)?
        } else {
            models::from_config(&text)?
        };
        return Ok((
            model,
            ModelSource::Config {
                path: path.display().to_string(),
            },
        ));
    }
    let name = a.model.expect("clap requires --model or --config");
    let n = a.n;
    let omegas = a.omega.clone().unwrap_or_else(|| default_omegas(n));
    let (model, f, omegas) = match name {
        BuiltIn::Canonical => {
            let mut m = models::canonical(n)?;
            if let Some(src) = &a.f {
                let h = Section::uniform(m.atlas(), "h", &Expression::parse(src)?)?;
                m = m.with_hamiltonian(h);
            }
            (m, a.f.clone(), Vec::new())
        }
        BuiltIn::Primer => {
            let f = a.f.clone().unwrap_or_else(|| "2 + sin(phi)".into());
            (models::primer(n, &omegas, &f, a.k)?, Some(f), omegas)
        }
        BuiltIn::Primer2 => {
            let f = a.f.clone().unwrap_or_else(|| "sin(phi)".into());
            (models::primer2(n, &omegas, &f)?, Some(f), omegas)
        }
        BuiltIn::Primer2Reduced => {
            let f = a.f.clone().unwrap_or_else(|| "sin(phi)".into());
            (models::primer2_reduced(n, &omegas, &f)?, Some(f), omegas)
        }
    };
    let k = if name == BuiltIn::Primer { a.k } else { 0 };
    Ok((model, ModelSource::BuiltIn { name, n, omegas, f, k }))
}

fn check_tolerances(t: &Tolerances, t_final: f64) -> Result<(), Failure> {
    for (name, v) in [
        ("rtol", t.rtol),
        ("atol", t.atol),
        ("tol", t.validation),
        ("strata-tol", t.strata),
        ("rank-tol", t.rank),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Failure::input(format!("--{name} must be positive, got {v}")));
        }
    }
    if !t_final.is_finite() {
        return Err(Failure::input("--t-final must be finite"));
    }
    Ok(())
}

fn default_samples(command: &str) -> usize {
    match command {
        "check" => 100,
        "classify" => 1000,
        "freq" => 1000,
        _ => 0,
    }
}

fn default_format(command: &str) -> Format {
    match command {
        "flow" | "classify" => Format::Csv,
        _ => Format::Json,
    }
}

impl<'a> Run<'a> {
    fn new(command: &'a Command, threads: Option<usize>) -> Result<Self, Failure> {
        let name = command.name();
        let args = command.args();
        let tolerances = Tolerances {
            rtol: args.rtol,
            atol: args.atol,
            validation: args.tol,
            strata: args.strata_tol,
            rank: args.rank_tol,
        };
        check_tolerances(&tolerances, args.t_final)?;
        let (model, source) = load_model(args, name == "check")?;
        let format = args.format.unwrap_or_else(|| default_format(name));
        if name == "check" && format == Format::Csv {
            return Err(Failure::input("check writes JSON reports only"));
        }
        let cfg = RunConfig {
            command: name.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            model: source,
            t_final: args.t_final,
            samples: args.samples.unwrap_or_else(|| default_samples(name)),
            seed: args.seed,
            chart: None,
            x0: None,
            angles: None,
            tolerances,
            output: OutputSpec {
                path: args.out.as_ref().map(|p| p.display().to_string()),
                format,
            },
            threads,
        };
        Ok(Self { args, cfg, model })
    }

    /// Resolves `--chart` and `--x0`, recording the result in the run config.
    fn start(&mut self) -> Result<Point, Failure> {
        let atlas = self.model.atlas();
        let chart = match &self.args.chart {
            None => 0,
            Some(c) => match atlas.chart_index(c) {
                Ok(i) => i,
                Err(_) => c
                    .parse::<usize>()
                    .ok()
                    .filter(|i| *i < atlas.charts().len())
                    .ok_or_else(|| Failure::input(format!("unknown chart `{c}`")))?,
            },
        };
        let ch = atlas.chart(chart);
        let x0 = match &self.args.x0 {
            Some(x) if x.len() != ch.dim() => {
                return Err(Failure::input(format!(
                    "--x0 has {} coordinates, chart `{}` has {}",
                    x.len(),
                    ch.id(),
                    ch.dim()
                )))
            }
            Some(x) => x.clone(),
            None => ch
                .periodic()
                .iter()
                .enumerate()
                .map(|(j, &p)| if p { 0.1 * (j + 1) as f64 } else { 0.5 })
                .collect(),
        };
        self.cfg.chart = Some(ch.id().to_string());
        self.cfg.x0 = Some(x0.clone());
        Ok(Point::new(chart, x0))
    }

    fn angles(&mut self, chart: usize) -> Vec<usize> {
        let angles = self.args.angles.clone().unwrap_or_else(|| {
            let c = self.model.atlas().chart(chart);
            (0..c.dim()).filter(|&i| c.periodic()[i]).collect()
        });
        self.cfg.angles = Some(angles.clone());
        angles
    }

    fn flow_options(&self, output: Output) -> FlowOptions {
        FlowOptions {
            rtol: self.cfg.tolerances.rtol,
            atol: self.cfg.tolerances.atol,
            output,
            ..FlowOptions::default()
        }
    }

    fn chart_ids(&self) -> Vec<ChartInfo> {
        self.model
            .atlas()
            .charts()
            .iter()
            .enumerate()
            .map(|(index, c)| ChartInfo {
                index,
                id: c.id().to_string(),
                coordinates: c.names().to_vec(),
            })
            .collect()
    }
}

#[derive(Serialize)]
struct ChartInfo {
    index: usize,
    id: String,
    coordinates: Vec<String>,
}

pub fn run(command: &Command, threads: Option<usize>) -> Result<(), Failure> {
    let mut run = Run::new(command, threads)?;
    match command {
        Command::Check(_) => check(&mut run),
        Command::Flow(_) => flow_cmd(&mut run),
        Command::Classify(_) => classify(&mut run),
        Command::Freq(_) => freq(&mut run),
        Command::Actions(_) => actions(&mut run),
    }
}

fn check(run: &mut Run) -> Result<(), Failure> {
    #[derive(Serialize)]
    struct Report<'a> {
        config: &'a RunConfig,
        ok: bool,
        failure: Option<String>,
        report: contactkit::models::ModelReport,
    }
    let report = run.model.validate(run.cfg.samples, run.cfg.tolerances.validation)?;
    let failure = report.first_failure();
    let doc = Report {
        config: &run.cfg,
        ok: failure.is_none(),
        failure: failure.as_ref().map(|e| e.to_string()),
        report,
    };
    emit(run.args.out.as_deref(), &to_json(&doc)?)?;
    match failure {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

fn flow_cmd(run: &mut Run) -> Result<(), Failure> {
    let x0 = run.start()?;
    let output = match run.args.samples {
        Some(n) => Output::Uniform(n),
        None => Output::Steps,
    };
    let opts = run.flow_options(output);
    let tr = flow(run.model.atlas(), run.model.hamiltonian(), &x0, run.cfg.t_final, &opts)?;
    let atlas = run.model.atlas();
    let charts = run.chart_ids();
    match run.cfg.output.format {
        Format::Json => {
            #[derive(Serialize)]
            struct Doc<'a> {
                config: &'a RunConfig,
                charts: &'a [ChartInfo],
                trajectory: &'a contactkit::dynamics::Trajectory,
            }
            let doc = Doc {
                config: &run.cfg,
                charts: &charts,
                trajectory: &tr,
            };
            emit(run.args.out.as_deref(), &to_json(&doc)?)
        }
        Format::Csv => {
            let mut csv = csv_line(
                ["t".to_string(), "chart".to_string()]
                    .into_iter()
                    .chain(coordinate_columns(atlas)),
            );
            for (t, p) in tr.times.iter().zip(&tr.points) {
                let cells = [num(*t), atlas.chart(p.chart).id().to_string()]
                    .into_iter()
                    .chain(p.coords.iter().map(|v| num(*v)));
                csv.push_str(&csv_line(cells));
            }
            emit(run.args.out.as_deref(), &csv)?;
            #[derive(Serialize)]
            struct Switch<'a> {
                time: f64,
                from: &'a str,
                to: &'a str,
            }
            #[derive(Serialize)]
            struct Sidecar<'a> {
                config: &'a RunConfig,
                charts: &'a [ChartInfo],
                chart_switches: Vec<Switch<'a>>,
                stats: contactkit::dynamics::StepStats,
            }
            let side = Sidecar {
                config: &run.cfg,
                charts: &charts,
                chart_switches: tr
                    .chart_switches
                    .iter()
                    .map(|s| Switch {
                        time: s.time,
                        from: atlas.chart(s.from).id(),
                        to: atlas.chart(s.to).id(),
                    })
                    .collect(),
                stats: tr.stats,
            };
            emit_sidecar(run.args.out.as_deref(), "switches", &to_json(&side)?)?;
            Ok(())
        }
    }
}

fn classify(run: &mut Run) -> Result<(), Failure> {
    let model = &run.model;
    let atlas = model.atlas();
    let mut rng = ChaCha8Rng::seed_from_u64(run.cfg.seed);
    let total = run.cfg.samples;
    let mut points = model.stratum_seeds(total / 10, &mut rng)?;
    while points.len() < total {
        let i = rng.gen_range(0..atlas.charts().len());
        points.push(Point::new(i, uniform_in(atlas.chart(i), &mut rng)));
    }
    points.truncate(total);
    let tols = StrataTolerances {
        strata: run.cfg.tolerances.strata,
        rank: run.cfg.tolerances.rank,
    };
    let results = classify_many(atlas, model.sections(), model.r(), &points, tols, Execution::Parallel);
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for r in &results {
        let key = match r {
            Ok(c) => c.stratum.name().to_string(),
            Err(_) => "error".to_string(),
        };
        *counts.entry(key).or_default() += 1;
    }

    #[derive(Serialize)]
    struct Summary<'a> {
        config: &'a RunConfig,
        total: usize,
        counts: &'a BTreeMap<String, usize>,
    }
    let summary = Summary {
        config: &run.cfg,
        total: points.len(),
        counts: &counts,
    };
    match run.cfg.output.format {
        Format::Csv => {
            let header = ["chart".to_string()]
                .into_iter()
                .chain(coordinate_columns(atlas))
                .chain(["stratum", "dimE", "dimF"].map(String::from));
            let mut csv = csv_line(header);
            for (p, r) in points.iter().zip(&results) {
                let tail = match r {
                    Ok(c) => [c.stratum.name().to_string(), c.dim_e.to_string(), c.dim_f.to_string()],
                    Err(_) => ["error".to_string(), String::new(), String::new()],
                };
                let cells = [atlas.chart(p.chart).id().to_string()]
                    .into_iter()
                    .chain(p.coords.iter().map(|v| num(*v)))
                    .chain(tail);
                csv.push_str(&csv_line(cells));
            }
            emit(run.args.out.as_deref(), &csv)?;
            emit_sidecar(run.args.out.as_deref(), "summary", &to_json(&summary)?)?;
            Ok(())
        }
        Format::Json => {
            #[derive(Serialize)]
            struct Row<'a> {
                chart: &'a str,
                coords: &'a [f64],
                classification: Option<contactkit::bundle::Classification>,
                error: Option<String>,
            }
            #[derive(Serialize)]
            struct Doc<'a> {
                summary: Summary<'a>,
                points: Vec<Row<'a>>,
            }
            let rows = points
                .iter()
                .zip(&results)
                .map(|(p, r)| Row {
                    chart: atlas.chart(p.chart).id(),
                    coords: &p.coords,
                    classification: r.as_ref().ok().copied(),
                    error: r.as_ref().err().map(|e| e.to_string()),
                })
                .collect();
            emit(run.args.out.as_deref(), &to_json(&Doc { summary, points: rows })?)
        }
    }
}

#[derive(Serialize)]
struct AngleRow {
    index: usize,
    name: String,
    omega: f64,
    residual: f64,
}

fn freq(run: &mut Run) -> Result<(), Failure> {
    let x0 = run.start()?;
    let angles = run.angles(x0.chart);
    let opts = run.flow_options(Output::Uniform(run.cfg.samples.max(1)));
    let tr = flow(run.model.atlas(), run.model.hamiltonian(), &x0, run.cfg.t_final, &opts)?;
    let f = frequencies(run.model.atlas(), &tr, &angles)?;
    let names = run.model.atlas().chart(x0.chart).names();
    let rows: Vec<AngleRow> = angles
        .iter()
        .zip(f.omegas.iter().zip(&f.residuals))
        .map(|(&i, (&omega, &residual))| AngleRow {
            index: i,
            name: names[i].clone(),
            omega,
            residual,
        })
        .collect();
    match run.cfg.output.format {
        Format::Csv => {
            let mut csv = csv_line(["index", "name", "omega", "residual"].map(String::from));
            for r in &rows {
                csv.push_str(&csv_line([
                    r.index.to_string(),
                    r.name.clone(),
                    num(r.omega),
                    num(r.residual),
                ]));
            }
            emit(run.args.out.as_deref(), &csv)
        }
        Format::Json => {
            #[derive(Serialize)]
            struct Doc<'a> {
                config: &'a RunConfig,
                frequencies: &'a [AngleRow],
                max_residual: f64,
                samples: usize,
                chart_switches: usize,
            }
            let doc = Doc {
                config: &run.cfg,
                frequencies: &rows,
                max_residual: f.max_residual(),
                samples: tr.len(),
                chart_switches: tr.chart_switches.len(),
            };
            emit(run.args.out.as_deref(), &to_json(&doc)?)
        }
    }
}

#[derive(Serialize)]
struct ActionRow {
    index: usize,
    name: String,
    value: f64,
    error_estimate: f64,
    converged: bool,
}

fn actions(run: &mut Run) -> Result<(), Failure> {
    let x0 = run.start()?;
    let angles = run.angles(x0.chart);
    let chart = run.model.atlas().chart(x0.chart);
    let opts = QuadratureOptions::default();
    let mut rows = Vec::with_capacity(angles.len());
    for &i in &angles {
        if i >= chart.dim() {
            return Err(Failure::input(format!(
                "angle index {i} out of range for chart `{}`",
                chart.id()
            )));
        }
        let cycle = CoordinateCircle {
            base: x0.coords.clone(),
            index: i,
            turns: 1,
        };
        let r = loop_integral(chart, &cycle, &opts)?;
        rows.push(ActionRow {
            index: i,
            name: chart.names()[i].clone(),
            value: r.value,
            error_estimate: r.error_estimate,
            converged: r.converged,
        });
    }
    match run.cfg.output.format {
        Format::Csv => {
            let mut csv = csv_line(["index", "name", "value", "error_estimate", "converged"].map(String::from));
            for r in &rows {
                csv.push_str(&csv_line([
                    r.index.to_string(),
                    r.name.clone(),
                    num(r.value),
                    num(r.error_estimate),
                    r.converged.to_string(),
                ]));
            }
            emit(run.args.out.as_deref(), &csv)
        }
        Format::Json => {
            #[derive(Serialize)]
            struct Doc<'a> {
                config: &'a RunConfig,
                quadrature: QuadratureOptions,
                actions: &'a [ActionRow],
            }
            let doc = Doc {
                config: &run.cfg,
                quadrature: opts,
                actions: &rows,
            };
            emit(run.args.out.as_deref(), &to_json(&doc)?)
        }
    }
}
