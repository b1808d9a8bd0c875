use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::json;

use crate::config::{apply_set, load_table, resolve, RunConfig};
use crate::manifest::ManifestBuilder;
use crate::{AssetArgs, Command, Common};
use enwarsim::agents::{PerfTable, PERF_TABLE_FILE};
use enwarsim::handover::{
    evaluate_strategies, generate_ensemble, handover_metrics_to_csv, read_ensemble_jsonl, write_ensemble_jsonl,
};
use enwarsim::orchestrator::{read_packets_jsonl, render_report, render_reports, simulate, write_packets_jsonl, Assets};
use enwarsim::routing::{
    best_tau, evaluate_policies, metrics_to_csv, oracle_policy, ppo_train, sweep_to_csv, threshold_sweep,
    DegradationState, DrlPolicy, PolicyNet, RandomPolicy, RewardModel, RoutingPolicy, RuleBasedPolicy,
};
use enwarsim::scenario::{generate, Scenario};
use enwarsim::sensing::{generate_corpus, per_head_f1, train_classifier, Classifier, LabeledSample, FEATURE_NAMES};
use enwarsim::{Error, Result};

pub const ASSETS_ENV: &str = "ENWARSIM_ASSETS";
pub const DEFAULT_ASSETS: &str = "assets";
pub const CLASSIFIER_FILE: &str = "classifier.json";
pub const POLICY_FILE: &str = "policy.txt";

fn asset_dir() -> PathBuf {
    std::env::var_os(ASSETS_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_ASSETS))
}

fn read_asset(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingAsset(path.to_path_buf()),
        _ => Error::Io(e),
    })
}

/// Config resolution shared by every subcommand; `flags` are the
/// subcommand's own overrides, applied after `--set`.
fn load_config(common: &Common, flags: &[(&str, Option<String>)]) -> Result<RunConfig> {
    let mut table = match &common.config {
        Some(p) => load_table(p)?,
        None => toml::Table::new(),
    };
    for s in &common.set {
        apply_set(&mut table, s)?;
    }
    for (key, value) in flags {
        if let Some(v) = value {
            apply_set(&mut table, &format!("{key}={v}"))?;
        }
    }
    if let Some(seed) = common.seed {
        table.insert("seed".into(), toml::Value::Integer(seed as i64));
    }
    let mut cfg = resolve(table)?;
    cfg.propagate_seed();
    Ok(cfg)
}

fn out_dir(common: &Common) -> Result<PathBuf> {
    fs::create_dir_all(&common.out)?;
    Ok(common.out.clone())
}

fn write_out(m: &mut ManifestBuilder, dir: &Path, name: &str, bytes: impl AsRef<[u8]>) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, bytes)?;
    m.output(path.clone());
    Ok(path)
}

fn load_perf_table(arg: Option<&PathBuf>, m: &mut ManifestBuilder) -> Result<PerfTable> {
    let default = asset_dir().join(PERF_TABLE_FILE);
    let path = match arg {
        Some(p) => Some(p.clone()),
        None => default.exists().then_some(default),
    };
    let table = match &path {
        Some(p) => PerfTable::load(p)?,
        None => PerfTable::bundled()?,
    };
    m.asset_digest(
        &path.map(|p| p.display().to_string()).unwrap_or_else(|| "builtin:perf_table.csv".into()),
        table.checksum(),
    );
    Ok(table)
}

fn load_classifier(arg: Option<&PathBuf>, m: &mut ManifestBuilder) -> Result<Classifier> {
    let path = arg.cloned().unwrap_or_else(|| asset_dir().join(CLASSIFIER_FILE));
    let c = Classifier::from_json(&read_asset(&path)?)?;
    m.asset(&path)?;
    Ok(c)
}

fn load_policy(
    arg: Option<&str>,
    table: &PerfTable,
    cfg: &RunConfig,
    m: &mut ManifestBuilder,
) -> Result<Box<dyn RoutingPolicy>> {
    Ok(match arg {
        Some("oracle") => Box::new(oracle_policy(table, &cfg.policy.reward)?),
        Some("rule-based") => Box::new(RuleBasedPolicy::new(table)),
        Some("random") => Box::new(RandomPolicy),
        other => {
            let path = other
                .map(PathBuf::from)
                .unwrap_or_else(|| asset_dir().join(POLICY_FILE));
            let net = PolicyNet::from_text(&read_asset(&path)?)?;
            m.asset(&path)?;
            Box::new(DrlPolicy { net })
        }
    })
}

fn split_corpus(cfg: &RunConfig) -> Result<(Vec<LabeledSample>, Vec<LabeledSample>)> {
    let c = &cfg.classifier;
    if !(c.holdout_fraction > 0.0 && c.holdout_fraction < 1.0) {
        return Err(Error::InvalidConfig("holdout_fraction must lie in (0,1)".into()));
    }
    let mut corpus = generate_corpus(c.samples, &c.corpus, cfg.seed);
    let n_test = ((c.samples as f64) * c.holdout_fraction).round() as usize;
    if n_test == 0 || n_test >= c.samples {
        return Err(Error::InvalidConfig("corpus too small for the holdout split".into()));
    }
    let test = corpus.split_off(c.samples - n_test);
    Ok((corpus, test))
}

fn f1_json(f1: [f64; 4]) -> serde_json::Value {
    json!({ "camera": f1[0], "gps": f1[1], "lidar": f1[2], "radar": f1[3] })
}

fn opt<T: ToString>(v: Option<T>) -> Option<String> {
    v.map(|x| x.to_string())
}

pub fn run(command: Command, argv: Vec<String>) -> Result<()> {
    let name = argv.get(1).cloned().unwrap_or_default();
    let mut m = ManifestBuilder::new(&name, argv);
    let (cfg, dir) = match command {
        Command::GenScenario { common, ticks } => {
            let cfg = load_config(&common, &[("scenario.ticks", opt(ticks))])?;
            let dir = out_dir(&common)?;
            let s = generate(&cfg.scenario)?;
            let path = dir.join("scenario.json");
            s.save_json(&path)?;
            m.output(path);
            (cfg, dir)
        }
        Command::TrainClassifier { common, samples, trees } => {
            let cfg = load_config(
                &common,
                &[("classifier.samples", opt(samples)), ("classifier.forest.trees", opt(trees))],
            )?;
            let dir = out_dir(&common)?;
            let (train, test) = split_corpus(&cfg)?;
            let clf = train_classifier(&train, &cfg.classifier.forest)?;
            let f1 = per_head_f1(&clf, &test);
            write_out(&mut m, &dir, "classifier.json", clf.to_json()?)?;
            let metrics = json!({ "train_samples": train.len(), "holdout_samples": test.len(), "trees": clf.n_trees(), "holdout_f1": f1_json(f1) });
            write_out(&mut m, &dir, "classifier_metrics.json", serde_json::to_string_pretty(&metrics)?)?;
            (cfg, dir)
        }
        Command::TrainPolicy { common, iterations, table } => {
            let cfg = load_config(&common, &[("policy.train.episodes", opt(iterations))])?;
            let dir = out_dir(&common)?;
            let t = load_perf_table(table.as_ref(), &mut m)?;
            let (net, log) = ppo_train(&t, &cfg.policy.reward, &cfg.policy.train)?;
            write_out(&mut m, &dir, "policy.txt", net.to_text())?;
            let mut curve = String::from("iteration,batch_mean_reward\n");
            for (i, r) in log.batch_mean_reward.iter().enumerate() {
                curve.push_str(&format!("{},{r:.6}\n", i + 1));
            }
            write_out(&mut m, &dir, "training_curve.csv", curve)?;
            let oracle = oracle_policy(&t, &cfg.policy.reward)?;
            let states: Vec<serde_json::Value> = DegradationState::all()
                .map(|s| {
                    let (a, o) = (net.greedy(s), oracle.get(s));
                    json!({ "state": s.to_string(), "action": a.to_string(), "oracle": o.to_string(), "matches": a == o })
                })
                .collect();
            let matches = DegradationState::all().filter(|s| net.greedy(*s) == oracle.get(*s)).count();
            let summary = json!({ "oracle_matches": matches, "states": states });
            write_out(&mut m, &dir, "policy_summary.json", serde_json::to_string_pretty(&summary)?)?;
            (cfg, dir)
        }
        Command::Simulate {
            common,
            assets,
            scenario,
            tau,
        } => {
            let cfg = load_config(&common, &[("simulate.tau", opt(tau))])?;
            let AssetArgs { classifier, policy, table } = &assets;
            let t = load_perf_table(table.as_ref(), &mut m)?;
            let clf = load_classifier(classifier.as_ref(), &mut m)?;
            let pol = load_policy(policy.as_deref(), &t, &cfg, &mut m)?;
            let sc = match &scenario {
                Some(p) => {
                    let s = Scenario::load_json(p)?;
                    m.asset(p)?;
                    s
                }
                None => generate(&cfg.scenario)?,
            };
            let reward = RewardModel::new(&t, &cfg.policy.reward)?;
            let dir = out_dir(&common)?;
            let packets = simulate(
                &sc,
                Assets {
                    table: &t,
                    classifier: &clf,
                    policy: pol.as_ref(),
                    reward: &reward,
                },
                cfg.simulate,
            )?;
            let mut buf = Vec::new();
            write_packets_jsonl(&packets, &mut buf)?;
            write_out(&mut m, &dir, "packets.jsonl", buf)?;
            write_out(&mut m, &dir, "reports.txt", render_reports(&packets))?;
            let n = packets.len() as f64;
            let summary = json!({
                "ticks": packets.len(),
                "policy": pol.name(),
                "handovers": packets.iter().filter(|p| p.handover.is_some()).count(),
                "over_budget_ticks": packets.iter().filter(|p| p.latency.over_budget).count(),
                "mean_critical_path_ms": packets.iter().map(|p| p.latency.critical_path_ms).sum::<f64>() / n,
                "max_critical_path_ms": packets.iter().map(|p| p.latency.critical_path_ms).fold(0.0, f64::max),
                "final_serving": packets.last().map(|p| p.serving.to_string()),
            });
            write_out(&mut m, &dir, "simulation_summary.json", serde_json::to_string_pretty(&summary)?)?;
            (cfg, dir)
        }
        Command::EvalPolicies { common, assets, episodes } => {
            let cfg = load_config(&common, &[("eval.episodes", opt(episodes))])?;
            let t = load_perf_table(assets.table.as_ref(), &mut m)?;
            let drl = load_policy(assets.policy.as_deref(), &t, &cfg, &mut m)?;
            let dir = out_dir(&common)?;
            let model = RewardModel::new(&t, &cfg.policy.reward)?;
            let oracle = oracle_policy(&t, &cfg.policy.reward)?;
            let rule = RuleBasedPolicy::new(&t);
            let rows = evaluate_policies(
                &[&RandomPolicy, &rule, drl.as_ref()],
                &model,
                &oracle,
                cfg.eval.episodes,
                &cfg.eval.mix,
                cfg.seed,
            )?;
            write_out(&mut m, &dir, "policy_comparison.csv", metrics_to_csv(&rows)?)?;
            (cfg, dir)
        }
        Command::SweepThreshold { common, assets, episodes } => {
            let cfg = load_config(&common, &[("sweep.episodes", opt(episodes))])?;
            let t = load_perf_table(assets.table.as_ref(), &mut m)?;
            let clf = load_classifier(assets.classifier.as_ref(), &mut m)?;
            let pol = load_policy(assets.policy.as_deref(), &t, &cfg, &mut m)?;
            let dir = out_dir(&common)?;
            let model = RewardModel::new(&t, &cfg.policy.reward)?;
            let points = threshold_sweep(&cfg.sweep, &clf, pol.as_ref(), &model)?;
            write_out(&mut m, &dir, "threshold_sweep.csv", sweep_to_csv(&points)?)?;
            let summary = json!({ "policy": pol.name(), "best_tau": best_tau(&points) });
            write_out(&mut m, &dir, "sweep_summary.json", serde_json::to_string_pretty(&summary)?)?;
            (cfg, dir)
        }
        Command::EvalHandover {
            common,
            ensemble,
            sequences,
            save_ensemble,
        } => {
            let cfg = load_config(&common, &[("handover.ensemble.sequences", opt(sequences))])?;
            let ens = match &ensemble {
                Some(p) => {
                    let f = fs::File::open(p).map_err(|e| match e.kind() {
                        std::io::ErrorKind::NotFound => Error::MissingAsset(p.clone()),
                        _ => Error::Io(e),
                    })?;
                    let ens = read_ensemble_jsonl(BufReader::new(f))?;
                    m.asset(p)?;
                    ens
                }
                None => generate_ensemble(&cfg.handover.ensemble, cfg.seed)?,
            };
            let dir = out_dir(&common)?;
            if save_ensemble {
                let mut buf = Vec::new();
                write_ensemble_jsonl(&ens, &mut buf)?;
                write_out(&mut m, &dir, "ensemble.jsonl", buf)?;
            }
            let rows = evaluate_strategies(&ens, &cfg.handover.fsm, cfg.handover.horizon)?;
            write_out(&mut m, &dir, "handover_strategies.csv", handover_metrics_to_csv(&rows)?)?;
            (cfg, dir)
        }
        Command::BenchClassifier { common, samples, trees } => {
            let cfg = load_config(
                &common,
                &[("classifier.samples", opt(samples)), ("classifier.forest.trees", opt(trees))],
            )?;
            let dir = out_dir(&common)?;
            let (train, test) = split_corpus(&cfg)?;
            let mut corpus = String::new();
            corpus.push_str(&FEATURE_NAMES.join(","));
            corpus.push_str(",camera,gps,lidar,radar,split\n");
            for (split, set) in [("train", &train), ("holdout", &test)] {
                for s in set.iter() {
                    let f: Vec<String> = s.features.to_array().iter().map(|x| format!("{x:.6}")).collect();
                    let l: Vec<&str> = s.flags.0.iter().map(|b| if *b { "1" } else { "0" }).collect();
                    corpus.push_str(&format!("{},{},{split}\n", f.join(","), l.join(",")));
                }
            }
            write_out(&mut m, &dir, "corpus.csv", corpus)?;
            let start = Instant::now();
            let clf = train_classifier(&train, &cfg.classifier.forest)?;
            let train_ms = start.elapsed().as_secs_f64() * 1e3;
            let start = Instant::now();
            let f1 = per_head_f1(&clf, &test);
            let score_ms = start.elapsed().as_secs_f64() * 1e3;
            let bench = json!({
                "train_samples": train.len(),
                "holdout_samples": test.len(),
                "trees": clf.n_trees(),
                "holdout_f1": f1_json(f1),
                "train_ms": train_ms,
                "classify_us_per_sample": score_ms * 1e3 / test.len() as f64,
            });
            write_out(&mut m, &dir, "classifier_bench.json", serde_json::to_string_pretty(&bench)?)?;
            (cfg, dir)
        }
        Command::Report { common, packets, tick } => {
            let cfg = load_config(&common, &[])?;
            let f = fs::File::open(&packets).map_err(|e| match e.kind() {
                std::io::ErrorKind::NotFound => Error::MissingAsset(packets.clone()),
                _ => Error::Io(e),
            })?;
            let all = read_packets_jsonl(BufReader::new(f))?;
            m.asset(&packets)?;
            let dir = out_dir(&common)?;
            let text = match tick {
                Some(t) => {
                    let p = all
                        .iter()
                        .find(|p| p.tick == t)
                        .ok_or_else(|| Error::Data(format!("no packet for tick {t}")))?;
                    render_report(p)
                }
                None => render_reports(&all),
            };
            write_out(&mut m, &dir, "reports.txt", text)?;
            (cfg, dir)
        }
    };
    m.finish(&cfg, &dir)?;
    Ok(())
}
