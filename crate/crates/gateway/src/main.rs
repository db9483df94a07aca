use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use governor_core::auction::format_utility;
use governor_core::engine::JobState;
use governor_core::eval::{eval_audit, eval_fiscal, eval_trust, EvalReport};
use governor_core::money::Cents;
use governor_core::review::verify_trail;
use governor_gateway::{build_engine, router, system_clock, AppState, CHARTER_ENV, STORE_ENV};

#[derive(Parser)]
#[command(name = "governor", version, about = "Charter-governed agent runtime")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan, approve, run and audit one mission.
    Run {
        goal: String,
        #[arg(long)]
        revenue_cents: Option<i64>,
        #[arg(long, env = CHARTER_ENV)]
        charter: Option<PathBuf>,
        /// Directory for the JSONL stores; in memory when absent.
        #[arg(long, env = STORE_ENV)]
        store: Option<PathBuf>,
        /// Print the full outcome as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Start the HTTP gateway.
    Serve {
        #[arg(long, env = "GOVERNOR_PORT", default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, env = CHARTER_ENV)]
        charter: Option<PathBuf>,
        #[arg(long, env = STORE_ENV)]
        store: Option<PathBuf>,
    },
    /// Re-hash every report in an audit trail file.
    VerifyTrail { path: PathBuf },
    /// Run one evaluation and print its table.
    Eval {
        axis: Axis,
        #[arg(long)]
        json: bool,
        /// Write the audit trail here instead of keeping it in memory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Axis {
    Fiscal,
    Trust,
    Audit,
}

fn main() -> ExitCode {
    match real_main(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Run { goal, revenue_cents, charter, store, json } => run(&goal, revenue_cents, charter, store, json),
        Command::Serve { port, host, charter, store } => serve(&host, port, charter, store),
        Command::VerifyTrail { path } => {
            let v = verify_trail(&path).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
            println!("{}", serde_json::to_string_pretty(&v)?);
            Ok(if v.is_clean() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Eval { axis, json, out } => {
            let report = match axis {
                Axis::Fiscal => eval_fiscal(),
                Axis::Trust => eval_trust(),
                Axis::Audit => eval_audit(out.as_deref())?,
            };
            print_report(&report, json)?;
            Ok(if report.passed { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
    }
}

fn print_report(report: &EvalReport, json: bool) -> anyhow::Result<()> {
    if json {
        println!("{}", serde_json::to_string_pretty(&report.to_json())?);
    } else {
        println!("{}", report.to_markdown());
    }
    Ok(())
}

fn run(
    goal: &str,
    revenue: Option<i64>,
    charter: Option<PathBuf>,
    store: Option<PathBuf>,
    json: bool,
) -> anyhow::Result<ExitCode> {
    let mut engine = build_engine(charter.as_deref(), store.as_deref(), system_clock())?;
    let job = engine.submit_job(goal, revenue.map(Cents))?;
    let job = engine.process_next().unwrap_or(job);
    let outcome = engine.outcome(&job.job_id);
    if json {
        let body = serde_json::json!({
            "job": job,
            "outcome": outcome,
            "digest": outcome.map(|o| o.digest()),
            "ledger": engine.ledger().snapshot(),
        });
        println!("{}", serde_json::to_string_pretty(&body)?);
    } else {
        println!("{} {}", job.job_id, job.state.as_str());
        if let Some(o) = outcome {
            for a in &o.auctions {
                println!(
                    "  auction {} -> {} (utility {})",
                    a.rfp_id,
                    a.winner.as_deref().unwrap_or("-"),
                    format_utility(&a.winning_utility, 3)
                );
            }
            for t in &job.tasks {
                println!(
                    "  {:<28} {:<8} worker={} cost={}c tokens={} score={}",
                    t.task_id,
                    format!("{:?}", t.status).to_uppercase(),
                    t.worker_id.as_deref().unwrap_or("-"),
                    t.cost_usd_cents.map_or("-".into(), |c| c.to_string()),
                    t.tokens_used.map_or("-".into(), |c| c.to_string()),
                    t.score.as_deref().unwrap_or("-"),
                );
            }
            println!("  digest {}", o.digest());
        }
        if let Some(reason) = &job.failure_reason {
            println!("  failed [{}]: {reason}", job.failure_code.as_deref().unwrap_or("?"));
        }
        println!("  balance {}", engine.ledger().total_usd_cents());
    }
    Ok(if job.state == JobState::Completed { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn serve(host: &str, port: u16, charter: Option<PathBuf>, store: Option<PathBuf>) -> anyhow::Result<ExitCode> {
    let engine = build_engine(charter.as_deref(), store.as_deref(), system_clock())?;
    let state = AppState::new(engine, charter);
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        state.spawn_worker();
        let listener = tokio::net::TcpListener::bind((host, port)).await?;
        eprintln!("governor listening on http://{}", listener.local_addr()?);
        axum::serve(listener, router(state))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok::<_, anyhow::Error>(())
    })?;
    Ok(ExitCode::SUCCESS)
}
