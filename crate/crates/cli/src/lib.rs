//! Command-line front-end: argument parsing, config loading and the
//! subcommands behind the `qosrec` binary.

pub mod config;

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use qosrec_core::catalog::{build_cache_set, generate_catalog, CacheSet, Catalog};
use qosrec_core::dataio::{
    emit_abandonment_table, emit_distribution_table, emit_heatmap, emit_hr_rr, emit_ratings_table,
    load_rating_samples, load_sessions, read_catalog, save_sessions, session_samples, write_catalog, ColumnMapping,
    Provenance, ReportBundle, SESSION_SCHEMA,
};
use qosrec_core::qoemodel::{
    build_design, cross_validate, feature_sweep, filter_outliers, fit, Basic, EvalReport, Feature,
    ModelKind, SweepPoint,
};
use qosrec_core::rating::Sample;
use qosrec_core::simulator::{run_experiment, Session, World};
use qosrec_core::stats::{
    binary_chi_square_suite, nb_cv_accuracy, nb_decision_table, nb_fit, pearson_corr, rating_chi_square_suite,
    BinaryFeatures, NamedChiSquare, DECISION_PRIORS,
};

pub use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "qosrec", version, about = "QoS-aware recommendation simulator and QoE modelling toolkit")]
pub struct Cli {
    /// JSON run configuration; defaults are used for missing sections.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; replaces every seed in the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for simulation and cross-validation.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    /// Format of tables written to stdout.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a catalog, related-items graph and cache set.
    GenCatalog {
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate viewing sessions and write a session log.
    Simulate {
        /// Catalog directory from `gen-catalog`; generated from the config if absent.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a QoE model, cross-validate it and save it as JSON.
    Fit {
        /// Session log or rating CSV.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Model kind; defaults to the first of `model.kinds`.
        #[arg(long)]
        model: Option<ModelKind>,
    },
    /// HR/RR, ratings, abandonment and distribution tables of a session log.
    Eval {
        #[arg(long)]
        data: PathBuf,
        /// Directory for the CSV tables; stdout if absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Naive Bayes decision table, CV accuracy and chi-square tests.
    Nbayes {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the whole pipeline and write every table into one directory.
    Report {
        /// Session log or rating CSV; a fresh simulation is used if absent.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::GenCatalog { .. } => "gen-catalog",
            Command::Simulate { .. } => "simulate",
            Command::Fit { .. } => "fit",
            Command::Eval { .. } => "eval",
            Command::Nbayes { .. } => "nbayes",
            Command::Report { .. } => "report",
        }
    }
}

/// Runs one command; tables meant for the terminal go to `stdout`.
pub fn run(cli: &Cli, stdout: &mut dyn Write) -> anyhow::Result<()> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    }
    .resolve(cli.seed)?;
    let prov = Provenance::new()
        .with("tool", concat!("qosrec ", env!("CARGO_PKG_VERSION")))
        .with("command", cli.command.name())
        .with("config", cfg.to_compact_json());
    let ctx = Ctx { cfg, prov, jobs: cli.jobs.max(1), format: cli.format };
    match &cli.command {
        Command::GenCatalog { out } => {
            let (catalog, cache) = ctx.build_catalog()?;
            write_catalog(out, &catalog, &cache, &ctx.prov)?;
            log::info!("wrote {} videos to {}", catalog.videos.len(), out.display());
        }
        Command::Simulate { data, out } => {
            let (catalog, cache) = match data {
                Some(dir) => read_catalog(dir).with_context(|| format!("reading catalog {}", dir.display()))?,
                None => ctx.build_catalog()?,
            };
            let sessions = ctx.simulate(&catalog, &cache)?;
            save_sessions(out, &sessions, &ctx.prov)?;
            log::info!("wrote {} sessions to {}", sessions.len(), out.display());
        }
        Command::Fit { data, out, model } => {
            let (samples, _) = ctx.load_data(data)?;
            let kind = model.unwrap_or(ctx.cfg.model.kinds[0]);
            let samples = ctx.filtered(&samples);
            let fitted = fit(kind, &build_design(&samples, &ctx.cfg.model.features), &ctx.cfg.model.hyper)?;
            fitted.save(out)?;
            let report = ctx.cross_validate(&samples, kind)?;
            match ctx.format {
                Format::Csv => stdout.write_all(cv_csv(&ctx.prov, std::slice::from_ref(&report)).as_bytes())?,
                Format::Json => writeln!(stdout, "{}", serde_json::to_string_pretty(&report)?)?,
            }
        }
        Command::Eval { data, out } => {
            let (_, sessions) = ctx.load_data(data)?;
            let Some(sessions) = sessions else { bail!("eval needs a session log") };
            let tables = session_tables(&sessions, &ctx.prov)?;
            ctx.emit(stdout, out.as_deref(), &tables.files, &tables.bundle)?;
        }
        Command::Nbayes { data, out } => {
            let (samples, _) = ctx.load_data(data)?;
            let mut bundle = ReportBundle::default();
            let files = ctx.nb_tables(&samples, &mut bundle)?;
            ctx.emit(stdout, out.as_deref(), &files, &bundle)?;
        }
        Command::Report { data, out } => ctx.report(data.as_deref(), out)?,
    }
    Ok(())
}

struct Ctx {
    cfg: RunConfig,
    prov: Provenance,
    jobs: usize,
    format: Format,
}

/// Named CSV files plus the same content as a bundle.
struct Tables {
    files: Vec<(String, String)>,
    bundle: ReportBundle,
}

fn write_file(path: &Path, contents: &str) -> anyhow::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

impl Ctx {
    fn build_catalog(&self) -> anyhow::Result<(Catalog, CacheSet)> {
        let catalog = generate_catalog(&self.cfg.catalog)?;
        let cache = build_cache_set(&catalog.videos, &catalog.graph, &catalog.trending, self.cfg.cache.capacity)?;
        Ok((catalog, cache))
    }

    fn simulate(&self, catalog: &Catalog, cache: &CacheSet) -> anyhow::Result<Vec<Session>> {
        let world = World { graph: &catalog.graph, cache, trending: &catalog.trending };
        Ok(run_experiment(world, &self.cfg.sim_config(), self.cfg.io.n_sessions, self.cfg.seeds.simulate, self.jobs)?)
    }

    /// Session logs are recognised by their schema line; anything else is read
    /// as a rating CSV through `io.mapping`.
    fn load_data(&self, path: &Path) -> anyhow::Result<(Vec<Sample>, Option<Vec<Session>>)> {
        let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
        let mut first = String::new();
        BufReader::new(file).read_line(&mut first)?;
        if first.trim_end() == format!("# schema={SESSION_SCHEMA}") {
            let sessions = load_sessions(path).with_context(|| format!("reading {}", path.display()))?;
            return Ok((session_samples(&sessions), Some(sessions)));
        }
        let mapping = self.cfg.io.mapping.clone().unwrap_or_else(ColumnMapping::canonical);
        let samples = load_rating_samples(path, &mapping).with_context(|| format!("reading {}", path.display()))?;
        Ok((samples, None))
    }

    fn filtered(&self, samples: &[Sample]) -> Vec<Sample> {
        match self.cfg.model.outliers {
            Some(mode) => filter_outliers(samples, mode),
            None => samples.to_vec(),
        }
    }

    fn cross_validate(&self, samples: &[Sample], kind: ModelKind) -> anyhow::Result<EvalReport> {
        let m = &self.cfg.model;
        Ok(cross_validate(samples, &m.features, kind, self.cfg.eval.folds, self.cfg.seeds.cv, &m.hyper, self.jobs)?)
    }

    fn nb_tables(&self, samples: &[Sample], bundle: &mut ReportBundle) -> anyhow::Result<Vec<(String, String)>> {
        let binary: Vec<BinaryFeatures> = samples.iter().map(BinaryFeatures::from).collect();
        let mut files = Vec::new();
        bundle.chi_square_binary = binary_chi_square_suite(&binary);
        bundle.chi_square_ratings = rating_chi_square_suite(samples);
        let all = bundle.chi_square_binary.iter().chain(&bundle.chi_square_ratings);
        files.push(("chi_square.csv".to_owned(), chi_csv(&self.prov, all)));

        let min: Vec<f64> = samples.iter().map(|s| Feature::min(Basic::Qos, Basic::Int).value(s.qos, s.interest, s.qor)).collect();
        let prod: Vec<f64> =
            samples.iter().map(|s| Feature::product(Basic::Qos, Basic::Int).value(s.qos, s.interest, s.qor)).collect();
        bundle.pearson_min_product = pearson_corr(&min, &prod).ok();

        match nb_fit(&binary) {
            Ok(model) => {
                let table = nb_decision_table(&model, &DECISION_PRIORS);
                let acc = nb_cv_accuracy(&binary, self.cfg.eval.nb_folds, self.cfg.seeds.cv)?;
                let mut text = self.prov.header();
                writeln!(text, "# empirical_prior={:.4} cv_accuracy_pct={acc:.2}", model.empirical_prior)?;
                text.push_str(&table.to_csv());
                files.push(("decision_table.csv".to_owned(), text));
                bundle.decision_table = Some(table);
                bundle.nb_cv_accuracy = Some(acc);
            }
            Err(e) => log::warn!("naive Bayes skipped: {e}"),
        }
        Ok(files)
    }

    /// Writes tables into `dir`, or prints them in the chosen format.
    fn emit(
        &self,
        stdout: &mut dyn Write,
        dir: Option<&Path>,
        files: &[(String, String)],
        bundle: &ReportBundle,
    ) -> anyhow::Result<()> {
        match (dir, self.format) {
            (Some(dir), _) => {
                for (name, text) in files {
                    write_file(&dir.join(name), text)?;
                }
            }
            (None, Format::Csv) => {
                for (name, text) in files {
                    writeln!(stdout, "## {name}")?;
                    stdout.write_all(text.as_bytes())?;
                }
            }
            (None, Format::Json) => stdout.write_all(bundle.to_json()?.as_bytes())?,
        }
        Ok(())
    }

    fn report(&self, data: Option<&Path>, out: &Path) -> anyhow::Result<()> {
        let (samples, sessions) = match data {
            Some(path) => self.load_data(path)?,
            None => {
                let (catalog, cache) = self.build_catalog()?;
                write_catalog(&out.join("catalog"), &catalog, &cache, &self.prov)?;
                let sessions = self.simulate(&catalog, &cache)?;
                save_sessions(&out.join("sessions.csv"), &sessions, &self.prov)?;
                (session_samples(&sessions), Some(sessions))
            }
        };

        let mut bundle = ReportBundle::default();
        if let Some(sessions) = &sessions {
            let tables = session_tables(sessions, &self.prov)?;
            for (name, text) in &tables.files {
                write_file(&out.join("tables").join(name), text)?;
            }
            bundle = tables.bundle;
        }
        bundle.provenance = self.prov.entries().iter().cloned().collect();
        bundle.n_samples = samples.len();

        let filtered = self.filtered(&samples);
        bundle.n_samples_after_filter = filtered.len();
        let m = &self.cfg.model;
        let design = build_design(&filtered, &m.features);
        for &kind in &m.kinds {
            log::info!("cross-validating {kind}");
            bundle.eval.push(self.cross_validate(&filtered, kind)?);
            let model = fit(kind, &design, &m.hyper)?;
            write_file(&out.join("models").join(format!("{kind}.json")), &(model.to_json()? + "\n"))?;
            let heatmap = emit_heatmap(&model, &m.features, m.heatmap_qor)?;
            write_file(&out.join("models").join(format!("heatmap_{kind}.csv")), &heatmap.to_csv(&self.prov))?;
            bundle.heatmaps.push(heatmap);
        }
        write_file(&out.join("eval").join("cv.csv"), &cv_csv(&self.prov, &bundle.eval))?;
        write_file(&out.join("eval").join("weights.csv"), &weights_csv(&self.prov, &bundle.eval))?;

        if let Some(spec) = &self.cfg.eval.sweep {
            log::info!("sweeping {} features", spec.len());
            bundle.sweep = feature_sweep(
                &filtered,
                spec,
                self.cfg.eval.sweep_model,
                self.cfg.eval.folds,
                self.cfg.seeds.cv,
                &m.hyper,
                self.jobs,
            )?;
            write_file(&out.join("eval").join("sweep.csv"), &sweep_csv(&self.prov, &bundle.sweep))?;
        }

        for (name, text) in self.nb_tables(&samples, &mut bundle)? {
            write_file(&out.join("stats").join(name), &text)?;
        }
        write_file(&out.join("report.json"), &bundle.to_json()?)?;
        Ok(())
    }
}

fn session_tables(sessions: &[Session], prov: &Provenance) -> anyhow::Result<Tables> {
    let mut files = Vec::new();
    let mut bundle = ReportBundle::default();
    match emit_hr_rr(sessions) {
        Ok(t) => {
            files.push(("hr_rr.csv".to_owned(), t.to_csv(prov)));
            bundle.hr_rr = Some(t);
        }
        Err(e) => log::warn!("HR/RR table skipped: {e}"),
    }
    let ratings = emit_ratings_table(sessions);
    files.push(("ratings.csv".to_owned(), ratings.to_csv(prov)));
    bundle.ratings = Some(ratings);
    match emit_abandonment_table(sessions) {
        Ok(t) => {
            files.push(("abandonment.csv".to_owned(), t.to_csv(prov)));
            bundle.abandonment = Some(t);
        }
        Err(e) => log::warn!("abandonment table skipped: {e}"),
    }
    let dist = emit_distribution_table(sessions);
    files.push(("distribution.csv".to_owned(), dist.to_csv(prov)));
    bundle.distribution = Some(dist);
    Ok(Tables { files, bundle })
}

fn cv_csv(prov: &Provenance, reports: &[EvalReport]) -> String {
    let mut out = prov.header();
    out.push_str("model,features,k,n,mae,exact_pct,off_by_one_pct,off_by_more_pct\n");
    for r in reports {
        let s = &r.score;
        writeln!(
            out,
            "{},{},{},{},{:.4},{:.4},{:.4},{:.4}",
            r.model,
            r.features.join(";"),
            r.k,
            s.n,
            s.mae,
            s.exact,
            s.one,
            s.gt1
        )
        .unwrap();
    }
    out
}

fn weights_csv(prov: &Provenance, reports: &[EvalReport]) -> String {
    let mut out = prov.header();
    out.push_str("model,feature,raw,normalized\n");
    for r in reports {
        if let (Some(raw), Some(norm)) = (&r.raw_weights, &r.normalized_weights) {
            for ((f, w), n) in r.features.iter().zip(raw).zip(norm) {
                writeln!(out, "{},{f},{w:.4},{n:.4}", r.model).unwrap();
            }
        }
    }
    out
}

fn sweep_csv(prov: &Provenance, sweep: &[SweepPoint]) -> String {
    let mut out = prov.header();
    out.push_str("n_features,features,mae\n");
    for p in sweep {
        writeln!(out, "{},{},{:.4}", p.n_features, p.features.join(";"), p.mae).unwrap();
    }
    out
}

fn chi_csv<'a>(prov: &Provenance, tests: impl IntoIterator<Item = &'a NamedChiSquare>) -> String {
    let mut out = prov.header();
    out.push_str("rows,cols,n,statistic,dof,log10_p\n");
    for t in tests {
        // Quoted: pair labels contain a comma.
        writeln!(
            out,
            "\"{}\",{},{},{:.4},{},{:.4}",
            t.rows, t.cols, t.n, t.test.statistic, t.test.dof, t.test.log10_p
        )
        .unwrap();
    }
    out
}
