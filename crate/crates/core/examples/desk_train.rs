//! Generates the 20-program desk corpus, trains with default settings and
//! prints the per-epoch losses followed by the evaluation table.

use funcgnn::corpus::{builtin_programs, generate_corpus};
use funcgnn::ged::{EditCostModel, DEFAULT_EXACT_NODE_LIMIT};
use funcgnn::model::ModelConfig;
use funcgnn::train::{
    evaluate_methods, split_dataset, target_variance, train_with_progress, EvalOptions, TrainConfig,
};

fn main() -> funcgnn::Result<()> {
    let epochs = std::env::args()
        .nth(1)
        .and_then(|a| a.parse().ok())
        .unwrap_or(100);
    let programs = builtin_programs();
    let records = generate_corpus(
        &programs[..20],
        4,
        &EditCostModel::default(),
        DEFAULT_EXACT_NODE_LIMIT,
        1,
    )?;
    let config = TrainConfig {
        epochs,
        ..Default::default()
    };
    let (train, test) = split_dataset(&records, config.split_ratio, config.seed)?;
    println!(
        "{} pairs, test variance {:.5}",
        records.len(),
        target_variance(&test)?
    );
    let start = std::time::Instant::now();
    let outcome = train_with_progress(&train, &test, &ModelConfig::default(), &config, &mut |l| {
        println!(
            "epoch {:3}  train {:.6}  test {:.6}  {:.1}s",
            l.epoch,
            l.train_mse,
            l.test_mse.unwrap_or(f64::NAN),
            start.elapsed().as_secs_f64()
        );
    })?;
    println!("best epoch {}", outcome.best_epoch);
    let report = evaluate_methods(&test, Some(&outcome.model), &EvalOptions::default())?;
    print!("{}", report.table());
    Ok(())
}
