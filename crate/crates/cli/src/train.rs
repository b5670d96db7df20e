use std::io::Write;

use serde::Serialize;
use uncertain_attr::data::{StandardizedDataset, UncertaintyLevel};
use uncertain_attr::predictor::{train_mlp, train_regularized_mlp, EpochStats, MlpPredictor};

use crate::workspace::{write_csv, write_file, write_json, Workspace};

#[derive(Serialize)]
struct ModelSummary {
    file: String,
    level: Option<UncertaintyLevel>,
    lambda: f64,
    final_loss: f64,
    test_rmse: f64,
}

struct Trained {
    summary: ModelSummary,
    log: Vec<EpochStats>,
}

fn rmse(model: &MlpPredictor, data: &StandardizedDataset) -> anyhow::Result<f64> {
    let preds = model.predict_batch(&data.features)?;
    let mse = preds.iter().zip(&data.labels).map(|(p, y)| (p - y).powi(2)).sum::<f64>() / data.len() as f64;
    Ok(mse.sqrt())
}

fn save(ws: &Workspace, model: &MlpPredictor, path: &std::path::Path) -> anyhow::Result<String> {
    write_file(path, model.to_json()? + "\n")?;
    Ok(path.strip_prefix(ws.out()).unwrap_or(path).display().to_string())
}

/// Trains the baseline network and one regularized network per level and
/// penalty, then writes the models, a per-epoch log and a summary.
pub fn run(ws: &Workspace, levels: &[UncertaintyLevel], sweep: bool) -> anyhow::Result<()> {
    let mut trained = Vec::new();

    eprintln!("training baseline network");
    let (nn, log) = train_mlp(&ws.train, &ws.config.train_config(0.0))?;
    let file = save(ws, &nn, &ws.nn_path())?;
    trained.push(Trained {
        summary: ModelSummary {
            file,
            level: None,
            lambda: 0.0,
            final_loss: log.last().map_or(f64::NAN, |s| s.loss),
            test_rmse: rmse(&nn, &ws.test)?,
        },
        log,
    });

    let mut lambdas = vec![ws.config.model.regnn_lambda];
    if sweep {
        for &l in &ws.config.model.sweep_lambdas {
            if !lambdas.contains(&l) {
                lambdas.push(l);
            }
        }
    }
    for &level in levels {
        let spec = ws.spec(level)?;
        for &lambda in &lambdas {
            eprintln!("training regularized network ({level}, lambda {lambda})");
            let (model, log) = train_regularized_mlp(&ws.train, &spec, &ws.config.train_config(lambda))?;
            let file = save(ws, &model, &ws.regnn_path(level, lambda))?;
            trained.push(Trained {
                summary: ModelSummary {
                    file,
                    level: Some(level),
                    lambda,
                    final_loss: log.last().map_or(f64::NAN, |s| s.loss),
                    test_rmse: rmse(&model, &ws.test)?,
                },
                log,
            });
        }
    }

    write_csv(&ws.out().join("train_log.csv"), |w| {
        writeln!(w, "model,level,lambda,epoch,loss,data_loss,penalty")?;
        for t in &trained {
            let level = t.summary.level.map_or("none".to_string(), |l| l.to_string());
            for s in &t.log {
                writeln!(
                    w,
                    "{},{},{},{},{},{},{}",
                    t.summary.file, level, t.summary.lambda, s.epoch, s.loss, s.data_loss, s.penalty
                )?;
            }
        }
        Ok(())
    })?;
    let summaries: Vec<&ModelSummary> = trained.iter().map(|t| &t.summary).collect();
    write_json(&ws.out().join("train_summary.json"), &summaries)?;
    for s in summaries {
        eprintln!("{}: test RMSE {:.4}", s.file, s.test_rmse);
    }
    Ok(())
}
