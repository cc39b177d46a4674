//! Single binary exposing the engine: eval, width, train, kmeans, prob,
//! oracle, and bench subcommands. Exit codes: 0 success, 1 usage error,
//! 2 data or planning error (with a diagnostic naming the offender).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use faqai_core::{
    bgd_train, count_4cycle, count_path_ineq, cutting_plane_train, evaluate_planned, faqw, gen,
    iq_probability, kmeans_fit, oracle_eval, oracle_worlds, plan, rat_display, rho_star, smfw,
    Database, EvalCounters, FaqAiQuery, FeatureQuery, IqQuery, Loss, SemiringId, SemiringValue,
    TrainConfig, VarSet,
};

#[derive(Parser)]
#[command(
    name = "faqai",
    about = "Aggregate queries with additive inequalities over semirings",
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a query over a CSV data directory.
    Eval {
        #[arg(short = 'q', long)]
        query: PathBuf,
        #[arg(short = 'd', long)]
        data: PathBuf,
        /// Print the chosen plan and stop.
        #[arg(long)]
        plan_only: bool,
        /// Emit operation counters as a JSON line.
        #[arg(long)]
        counters: bool,
    },
    /// Compute a width parameter of a query's hypergraph.
    Width {
        #[arg(short = 'q', long)]
        query: PathBuf,
        #[arg(long, value_enum)]
        kind: WidthArg,
        /// Target variables for rho_star (comma separated; default all).
        #[arg(long)]
        target: Option<String>,
    },
    /// Train a linear model over a feature-extraction join.
    Train {
        #[arg(long, value_enum)]
        loss: LossArg,
        #[arg(short = 'q', long)]
        query: PathBuf,
        #[arg(short = 'd', long)]
        data: PathBuf,
        #[arg(long, default_value_t = 1e-3)]
        lambda: f64,
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        #[arg(long, default_value_t = 1e-3)]
        eps: f64,
        #[arg(long, default_value_t = 100)]
        iters: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Optimizer: gradient descent or the cutting-plane SVM trainer.
        #[arg(long, value_enum, default_value_t = AlgoArg::Bgd)]
        algo: AlgoArg,
        /// Ordinal label count d.
        #[arg(long, default_value_t = 5)]
        ordinal_d: u32,
        /// Scalene quantile weight.
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        /// Epsilon-insensitive band width.
        #[arg(long, default_value_t = 0.1)]
        eps_band: f64,
    },
    /// Lloyd clustering over a feature-extraction join.
    Kmeans {
        #[arg(short = 'k', long)]
        k: usize,
        #[arg(short = 'q', long)]
        query: PathBuf,
        #[arg(short = 'd', long)]
        data: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        iters: usize,
    },
    /// Exact probability of an inequality-join query over a
    /// tuple-independent probabilistic database.
    Prob {
        #[arg(short = 'q', long)]
        query: PathBuf,
        #[arg(short = 'd', long)]
        data: PathBuf,
    },
    /// Brute-force reference evaluation (mirrors eval/prob flags).
    Oracle {
        #[arg(short = 'q', long)]
        query: PathBuf,
        #[arg(short = 'd', long)]
        data: PathBuf,
        /// Treat the query as a probabilistic inequality join.
        #[arg(long)]
        prob: bool,
    },
    /// Scaling benches for the degree-partitioned plans.
    Bench {
        #[arg(long, value_enum)]
        shape: ShapeArg,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        adversarial: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum WidthArg {
    RhoStar,
    Faqw,
    FaqwL,
    Fhtw,
    FhtwL,
    Smfw,
    SmfwL,
    SharpSmfw,
    SharpSmfwL,
    Subw,
    SharpSubw,
    SharpSubwL,
}

#[derive(Clone, Copy, ValueEnum)]
enum LossArg {
    Huber,
    Hinge,
    Eps,
    Ordinal,
    Scalene,
}

impl From<LossArg> for Loss {
    fn from(a: LossArg) -> Loss {
        match a {
            LossArg::Huber => Loss::Huber,
            LossArg::Hinge => Loss::Hinge,
            LossArg::Eps => Loss::EpsInsensitive,
            LossArg::Ordinal => Loss::OrdinalHinge,
            LossArg::Scalene => Loss::Scalene,
        }
    }
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum AlgoArg {
    Bgd,
    Cutting,
}

#[derive(Clone, Copy, ValueEnum)]
enum ShapeArg {
    Cycle4,
    #[value(name = "path4-ineq")]
    Path4Ineq,
}

fn main() -> ExitCode {
    // Parallelism cap; evaluation is deterministic regardless.
    if let Ok(v) = std::env::var("FAQAI_THREADS") {
        if v.parse::<usize>().map(|n| n == 0).unwrap_or(true) {
            eprintln!("FAQAI_THREADS must be a positive integer");
            return ExitCode::from(1);
        }
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap exits 2 by default; the contract here is 1 for usage.
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn read(path: &PathBuf) -> faqai_core::Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| faqai_core::Error::Data(format!("cannot read {path:?}: {e}")))
}

fn weight_json(v: &SemiringValue) -> serde_json::Value {
    match v {
        SemiringValue::Bool(b) => json!(b),
        SemiringValue::Int(i) => json!(i.to_string()),
        SemiringValue::Real(r) => json!(r),
    }
}

fn relation_json(rel: &faqai_core::AnnotatedRelation) -> serde_json::Value {
    if rel.schema().is_empty() {
        return json!({ "value": weight_json(&rel.scalar()) });
    }
    let rows: Vec<serde_json::Value> = rel
        .rows()
        .iter()
        .map(|(t, w)| {
            json!({
                "tuple": t.iter().map(|v| v.to_string()).collect::<Vec<_>>(),
                "value": weight_json(w),
            })
        })
        .collect();
    json!({ "free": rel.schema().vars(), "rows": rows })
}

fn counters_json(c: &EvalCounters) -> serde_json::Value {
    json!({
        "trie_probes": c.trie_probes,
        "dominance_queries": c.dominance_queries,
        "dominance_nodes": c.dominance_nodes,
        "tuples_materialized": c.tuples_materialized,
        "total": c.total(),
    })
}

fn run(cli: Cli) -> faqai_core::Result<()> {
    match cli.command {
        Command::Eval {
            query,
            data,
            plan_only,
            counters,
        } => {
            let q = FaqAiQuery::from_json(&read(&query)?)?;
            let the_plan = plan(&q)?;
            if plan_only {
                let h = q.hypergraph()?;
                print!("{}", the_plan.describe(&h));
                return Ok(());
            }
            let db = Database::load_dir(&data, q.semiring)?;
            let mut c = EvalCounters::default();
            let out = evaluate_planned(&db, &q, &the_plan, &mut c)?;
            println!("{}", relation_json(&out));
            if counters {
                println!("{}", json!({ "counters": counters_json(&c) }));
            }
            Ok(())
        }
        Command::Width {
            query,
            kind,
            target,
        } => {
            let q = FaqAiQuery::from_json(&read(&query)?)?;
            let h = q.hypergraph()?;
            let free = q.free_set(&h)?;
            let no_free = VarSet::EMPTY;
            let report = match kind {
                WidthArg::RhoStar => {
                    let t = match target {
                        None => h.all_vars(),
                        Some(list) => h.set_of(
                            &list
                                .split(',')
                                .map(|s| s.trim().to_string())
                                .collect::<Vec<_>>(),
                        )?,
                    };
                    let value = rho_star(&h, t)?;
                    println!(
                        "{}",
                        json!({ "kind": "rho_star", "value": rat_display(&value) })
                    );
                    return Ok(());
                }
                WidthArg::Faqw => faqw(&h, free, false)?,
                WidthArg::FaqwL => faqw(&h, free, true)?,
                WidthArg::Fhtw => faqw(&h, no_free, false)?,
                WidthArg::FhtwL => faqw(&h, no_free, true)?,
                WidthArg::Smfw => smfw(&h, free, false, false)?,
                WidthArg::SmfwL => smfw(&h, free, true, false)?,
                WidthArg::SharpSmfw => smfw(&h, free, false, true)?,
                WidthArg::SharpSmfwL => smfw(&h, free, true, true)?,
                WidthArg::Subw => smfw(&h, no_free, false, false)?,
                WidthArg::SharpSubw => smfw(&h, no_free, false, true)?,
                WidthArg::SharpSubwL => smfw(&h, no_free, true, true)?,
            };
            let witness_bags: Option<Vec<String>> = report
                .witness_td
                .as_ref()
                .map(|td| td.bags.iter().map(|b| h.display_set(*b)).collect());
            let witness_h: Option<Vec<serde_json::Value>> = report.witness_h.as_ref().map(|t| {
                t.iter()
                    .map(|(s, v)| json!([h.display_set(*s), rat_display(v)]))
                    .collect()
            });
            println!(
                "{}",
                json!({
                    "kind": report.kind.name(),
                    "value": rat_display(&report.value),
                    "witness_td": witness_bags,
                    "witness_h": witness_h,
                    "note": report.search_family_note,
                })
            );
            Ok(())
        }
        Command::Train {
            loss,
            query,
            data,
            lambda,
            c,
            eps,
            iters,
            seed,
            algo,
            ordinal_d,
            alpha,
            eps_band,
        } => {
            let fq = FeatureQuery::from_json(&read(&query)?)?;
            let db = Database::load_dir(&data, SemiringId::RealSumProd)?;
            let cfg = TrainConfig {
                lambda,
                c,
                eps,
                max_iters: iters,
                armijo: true,
                ordinal_d,
                alpha_scalene: alpha,
                eps_insensitive: eps_band,
                seed,
            };
            let loss: Loss = loss.into();
            let model = if algo == AlgoArg::Cutting {
                if loss != Loss::Hinge {
                    return Err(faqai_core::Error::Data(
                        "the cutting-plane trainer is for the hinge loss".into(),
                    ));
                }
                cutting_plane_train(&db, &fq, &cfg)?
            } else {
                bgd_train(&db, &fq, loss, &cfg)?
            };
            println!(
                "{}",
                json!({ "loss": serde_json::to_value(loss).unwrap(), "beta": model.beta })
            );
            Ok(())
        }
        Command::Kmeans {
            k,
            query,
            data,
            seed,
            iters,
        } => {
            let fq = FeatureQuery::from_json(&read(&query)?)?;
            let db = Database::load_dir(&data, SemiringId::RealSumProd)?;
            let cfg = TrainConfig {
                seed,
                max_iters: iters,
                ..TrainConfig::default()
            };
            let result = kmeans_fit(&db, &fq, k, &cfg)?;
            println!(
                "{}",
                json!({ "means": result.means, "iterations": result.trace.len() - 1 })
            );
            Ok(())
        }
        Command::Prob { query, data } => {
            let q = IqQuery::from_json(&read(&query)?)?;
            let db = Database::load_dir(&data, SemiringId::RealSumProd)?;
            let p = iq_probability(&db, &q)?;
            println!("{}", json!({ "probability": p }));
            Ok(())
        }
        Command::Oracle { query, data, prob } => {
            if prob {
                let q = IqQuery::from_json(&read(&query)?)?;
                let db = Database::load_dir(&data, SemiringId::RealSumProd)?;
                let p = oracle_worlds(&db, &q)?;
                println!("{}", json!({ "probability": p }));
            } else {
                let q = FaqAiQuery::from_json(&read(&query)?)?;
                let db = Database::load_dir(&data, q.semiring)?;
                let out = oracle_eval(&db, &q)?;
                println!("{}", relation_json(&out));
            }
            Ok(())
        }
        Command::Bench {
            shape,
            n,
            seed,
            adversarial,
        } => {
            match shape {
                ShapeArg::Cycle4 => {
                    let db = gen::cycle4_db(n, seed, adversarial);
                    let mut c = EvalCounters::default();
                    let count = count_4cycle(&db, &["r12", "r23", "r34", "r41"], &mut c)?;
                    println!(
                        "{}",
                        json!({
                            "shape": "cycle4", "n": n, "seed": seed,
                            "adversarial": adversarial,
                            "count": weight_json(&count),
                            "counters": counters_json(&c),
                        })
                    );
                }
                ShapeArg::Path4Ineq => {
                    let db = gen::path4_db(n, seed, adversarial);
                    let lig = gen::path4_ligament();
                    let mut c = EvalCounters::default();
                    let (count, stats) =
                        count_path_ineq(&db, &["R", "S", "T"], &lig, &mut c)?;
                    println!(
                        "{}",
                        json!({
                            "shape": "path4-ineq", "n": n, "seed": seed,
                            "adversarial": adversarial,
                            "count": weight_json(&count),
                            "u_size": stats.u_size, "w_size": stats.w_size,
                            "counters": counters_json(&c),
                        })
                    );
                }
            }
            Ok(())
        }
    }
}
