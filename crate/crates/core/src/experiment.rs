//! Experiment dispatch and CSV artifacts.
//!
//! A run trains one or more schemes for every configured seed and writes into
//! the output directory:
//!
//! * `{scheme}_{seed}.csv` (or `{scheme}_k{K}_{seed}.csv` for sweeps) with
//!   columns `episode,scheme,seed,mean_reward,noise_scale`, followed by one
//!   row whose episode field is `final` and whose reward is the mean of the
//!   last 100 episodes;
//! * `summary.csv` with `scheme,elements,seeds,final_mean,final_std`;
//! * `plot.csv`, the window-25 smoothed curves (see [`crate::plot`]);
//! * `{stem}.ckpt` per run when checkpoints are enabled, holding every team
//!   member's checkpoint back to back.
//!
//! Runs are independent and execute on up to `jobs` threads. Output bytes do
//! not depend on the thread count.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use crate::config::RunConfig;
use crate::error::Result;
use crate::plot::{emit_plotdata, DEFAULT_WINDOW};
use crate::train::{Scheme, Trace, Trainer};

/// Episodes averaged for the reported final energy efficiency.
pub const FINAL_WINDOW: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Job {
    pub scheme: Scheme,
    pub seed: u64,
    pub elements: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub scheme: Scheme,
    pub elements: usize,
    pub seeds: Vec<u64>,
    pub final_means: Vec<f64>,
}

impl SummaryRow {
    pub fn mean(&self) -> f64 {
        self.final_means.iter().sum::<f64>() / self.final_means.len() as f64
    }

    /// Sample standard deviation over seeds; zero for a single seed.
    pub fn std(&self) -> f64 {
        let n = self.final_means.len();
        if n < 2 {
            return 0.0;
        }
        let m = self.mean();
        (self.final_means.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    }
}

pub struct Outcome {
    pub traces: Vec<(Job, Trace)>,
    pub summary: Vec<SummaryRow>,
}

fn stem(job: &Job, sweep: bool) -> String {
    if sweep {
        format!("{}_k{}_{}", job.scheme, job.elements, job.seed)
    } else {
        format!("{}_{}", job.scheme, job.seed)
    }
}

pub fn write_trace_csv(trace: &Trace, w: &mut impl Write) -> Result<()> {
    writeln!(w, "episode,scheme,seed,mean_reward,noise_scale")?;
    for r in &trace.records {
        writeln!(w, "{},{},{},{},{}", r.episode, trace.scheme, trace.seed, r.mean_reward, r.noise_scale)?;
    }
    writeln!(w, "final,{},{},{},", trace.scheme, trace.seed, trace.final_mean(FINAL_WINDOW))?;
    Ok(())
}

pub fn write_summary_csv(rows: &[SummaryRow], w: &mut impl Write) -> Result<()> {
    writeln!(w, "scheme,elements,seeds,final_mean,final_std")?;
    for r in rows {
        let seeds: Vec<String> = r.seeds.iter().map(u64::to_string).collect();
        writeln!(w, "{},{},{},{},{}", r.scheme, r.elements, seeds.join(" "), r.mean(), r.std())?;
    }
    Ok(())
}

/// Groups traces by (scheme, elements), keeping first-seen order.
pub fn summarize(traces: &[(Job, Trace)]) -> Vec<SummaryRow> {
    let mut rows: Vec<SummaryRow> = Vec::new();
    for (job, trace) in traces {
        let v = trace.final_mean(FINAL_WINDOW);
        match rows.iter_mut().find(|r| r.scheme == job.scheme && r.elements == job.elements) {
            Some(r) => {
                r.seeds.push(job.seed);
                r.final_means.push(v);
            }
            None => rows.push(SummaryRow {
                scheme: job.scheme,
                elements: job.elements,
                seeds: vec![job.seed],
                final_means: vec![v],
            }),
        }
    }
    rows
}

fn train_one(cfg: &RunConfig, job: Job, checkpoint: Option<&Path>) -> Result<Trace> {
    let env = cfg.env_config_with_elements(job.seed, job.elements)?;
    let mut trainer = Trainer::new(job.scheme, env, &cfg.train_config())?;
    let trace = trainer.run(cfg.episodes)?;
    if let Some(path) = checkpoint {
        let mut w = BufWriter::new(File::create(path)?);
        for member in &trainer.team.members {
            member.save(&mut w)?;
        }
        w.flush()?;
    }
    Ok(trace)
}

/// Runs every job on up to `cfg.jobs` threads; results keep job order.
pub fn run_jobs(cfg: &RunConfig, jobs: &[Job], checkpoint_dir: Option<&Path>, sweep: bool) -> Result<Vec<Trace>> {
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<Trace>>>> = Mutex::new((0..jobs.len()).map(|_| None).collect());
    let workers = cfg.jobs.min(jobs.len()).max(1);
    thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&job) = jobs.get(i) else { break };
                let ckpt: Option<PathBuf> = checkpoint_dir.map(|d| d.join(format!("{}.ckpt", stem(&job, sweep))));
                let result = train_one(cfg, job, ckpt.as_deref());
                slots.lock().expect("worker panicked")[i] = Some(result);
            });
        }
    });
    slots.into_inner().expect("worker panicked").into_iter().map(|r| r.expect("every job ran")).collect()
}

fn execute(cfg: &RunConfig, jobs: Vec<Job>, sweep: bool) -> Result<Outcome> {
    cfg.validate()?;
    let out = &cfg.out_dir;
    fs::create_dir_all(out)?;
    let ckpt_dir = cfg.checkpoint.then_some(out.as_path());
    let traces = run_jobs(cfg, &jobs, ckpt_dir, sweep)?;
    let traces: Vec<(Job, Trace)> = jobs.into_iter().zip(traces).collect();

    for (job, trace) in &traces {
        let mut w = BufWriter::new(File::create(out.join(format!("{}.csv", stem(job, sweep))))?);
        write_trace_csv(trace, &mut w)?;
        w.flush()?;
    }
    let summary = summarize(&traces);
    let mut w = BufWriter::new(File::create(out.join("summary.csv"))?);
    write_summary_csv(&summary, &mut w)?;
    w.flush()?;
    if !sweep {
        let plain: Vec<Trace> = traces.iter().map(|(_, t)| t.clone()).collect();
        let mut w = BufWriter::new(File::create(out.join("plot.csv"))?);
        emit_plotdata(&plain, DEFAULT_WINDOW, &mut w)?;
        w.flush()?;
    }
    Ok(Outcome { traces, summary })
}

/// Trains each scheme for every configured seed.
pub fn run(cfg: &RunConfig, schemes: &[Scheme]) -> Result<Outcome> {
    let jobs = schemes
        .iter()
        .flat_map(|&scheme| cfg.seeds.iter().map(move |&seed| Job { scheme, seed, elements: cfg.elements }))
        .collect();
    execute(cfg, jobs, false)
}

/// Trains `scheme` at every element count in `cfg.sweep_elements`.
pub fn sweep(cfg: &RunConfig, scheme: Scheme) -> Result<Outcome> {
    let jobs = cfg
        .sweep_elements
        .iter()
        .flat_map(|&elements| cfg.seeds.iter().map(move |&seed| Job { scheme, seed, elements }))
        .collect();
    execute(cfg, jobs, true)
}
