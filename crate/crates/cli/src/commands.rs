//! The five subcommands. Every command re-reads what it wrote before
//! reporting success, so a zero exit code means the outputs parse cleanly.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use tomoseg_core::checkpoint::{load_checkpoint, save_checkpoint};
use tomoseg_core::data::{
    generate_sequence, load_dataset, resize_sequence_to, save_dataset, split_indices, window,
    PixelNormalizer, TomoSequence, WindowSample,
};
use tomoseg_core::eval::{evaluate, EvalReport};
use tomoseg_core::models::{CombinedModel, Mode, SurfaceGrid};
use tomoseg_core::training::{train, write_loss_log, EpochLog};

use crate::config::RunConfig;

pub fn cmd_generate(cfg: &RunConfig) -> Result<()> {
    if cfg.data.sequences == 0 {
        bail!("data.sequences must be positive");
    }
    let mut seqs = Vec::with_capacity(cfg.data.sequences);
    for i in 0..cfg.data.sequences {
        let params = cfg.gen_params(i);
        let mut seq = generate_sequence(&params)
            .with_context(|| format!("generating sequence {i}"))?;
        seq.id = format!("seq_{i:04}");
        seqs.push(seq);
    }
    save_dataset(&cfg.data.dir, &seqs)?;
    // Parse-back check.
    let reloaded = load_dataset(&cfg.data.dir)?;
    if reloaded != seqs {
        bail!("dataset verification failed: reloaded data differs");
    }
    println!(
        "wrote {} sequences ({}x{}x{}) to {}",
        seqs.len(),
        cfg.data.depth,
        cfg.data.height,
        cfg.data.width,
        cfg.data.dir.display()
    );
    Ok(())
}

/// Load the dataset and bring every sequence to the run geometry.
fn load_prepared(cfg: &RunConfig) -> Result<Vec<TomoSequence>> {
    let raw = load_dataset(&cfg.data.dir)?;
    raw.into_iter()
        .map(|seq| Ok(resize_sequence_to(&seq, cfg.data.height, cfg.data.width)?))
        .collect()
}

fn split_sequences(cfg: &RunConfig, seqs: &[TomoSequence]) -> Result<(Vec<usize>, Vec<usize>)> {
    Ok(split_indices(seqs.len(), cfg.train.split_ratio, cfg.seed)?)
}

fn windows_for(
    seqs: &[TomoSequence],
    indices: &[usize],
    normalizer: &PixelNormalizer,
    window_len: usize,
) -> Result<Vec<WindowSample>> {
    let mut out = Vec::new();
    for &i in indices {
        let normed = normalizer.normalize_sequence(&seqs[i])?;
        out.extend(window(&normed, window_len)?);
    }
    Ok(out)
}

fn checkpoint_path(cfg: &RunConfig) -> PathBuf {
    cfg.out.join("model.ckpt")
}

pub fn cmd_train(cfg: &RunConfig) -> Result<()> {
    let mode = cfg.mode()?;
    let model_cfg = cfg.model_config(mode)?;
    let seqs = load_prepared(cfg)?;
    let (train_idx, test_idx) = split_sequences(cfg, &seqs)?;
    println!(
        "training mode {mode} on {} sequences (test holdout {})",
        train_idx.len(),
        test_idx.len()
    );
    let train_refs: Vec<&TomoSequence> = train_idx.iter().map(|&i| &seqs[i]).collect();
    let mut normalizer = PixelNormalizer::new();
    normalizer.fit(&train_refs)?;
    let samples = windows_for(&seqs, &train_idx, &normalizer, model_cfg.window_len)?;

    let model = CombinedModel::new(&model_cfg, cfg.seed)?;
    let started = Instant::now();
    let log = train(&model, &samples, &cfg.train_options())?;
    println!(
        "trained {} epochs in {:.1} s (final loss {:.6})",
        log.len(),
        started.elapsed().as_secs_f64(),
        log.last().map(|e| e.mean_loss).unwrap_or(f64::NAN)
    );

    fs::create_dir_all(&cfg.out)?;
    let ckpt = checkpoint_path(cfg);
    save_checkpoint(&ckpt, &model, normalizer.mean())?;
    let log_path = cfg.out.join("loss_log.jsonl");
    write_loss_log(&log_path, &log)?;

    // Parse-back checks.
    let (reloaded, mean) = load_checkpoint(&ckpt)?;
    if reloaded.config() != model.config() || mean != normalizer.mean() {
        bail!("checkpoint verification failed");
    }
    for line in fs::read_to_string(&log_path)?.lines() {
        let _: EpochLog = serde_json::from_str(line).context("loss log verification failed")?;
    }
    println!("wrote {} and {}", ckpt.display(), log_path.display());
    Ok(())
}

fn load_model_for(cfg: &RunConfig, seqs: &[TomoSequence]) -> Result<(CombinedModel, PixelNormalizer)> {
    let ckpt = checkpoint_path(cfg);
    let (model, mean) = load_checkpoint(&ckpt)
        .with_context(|| format!("loading checkpoint {}", ckpt.display()))?;
    let mc = model.config();
    let requested = cfg.mode()?;
    if mc.mode != requested {
        bail!(
            "checkpoint was trained in mode {} but the run requests {}",
            mc.mode,
            requested
        );
    }
    if let Some(seq) = seqs.first() {
        if seq.height != mc.height || seq.width != mc.width || seq.layers != mc.boundary_count {
            bail!(
                "checkpoint geometry {}x{} with {} boundaries does not match dataset {}x{} with {}",
                mc.height,
                mc.width,
                mc.boundary_count,
                seq.height,
                seq.width,
                seq.layers
            );
        }
    }
    let mean = mean.ok_or_else(|| {
        anyhow::anyhow!("checkpoint carries no pixel mean; was it written by train?")
    })?;
    Ok((model, PixelNormalizer::from_mean(mean)))
}

fn write_surface_csv(path: &Path, grid: &SurfaceGrid) -> Result<()> {
    use std::io::Write;
    let mut file = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(file, "k,d,w,row")?;
    for k in 0..grid.layers {
        for d in 0..grid.depth {
            for w in 0..grid.width {
                writeln!(file, "{k},{d},{w},{}", grid.get(k, d, w))?;
            }
        }
    }
    Ok(())
}

fn read_surface_csv(path: &Path, height: usize) -> Result<SurfaceGrid> {
    let text = fs::read_to_string(path)?;
    let mut rows = Vec::new();
    let mut max = (0usize, 0usize, 0usize);
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            if line.trim() != "k,d,w,row" {
                bail!("bad surface CSV header in {}", path.display());
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.splitn(4, ',').collect();
        if parts.len() != 4 {
            bail!("short row in {}", path.display());
        }
        let k: usize = parts[0].parse()?;
        let d: usize = parts[1].parse()?;
        let w: usize = parts[2].parse()?;
        let row: f64 = parts[3].parse()?;
        max = (max.0.max(k + 1), max.1.max(d + 1), max.2.max(w + 1));
        rows.push((k, d, w, row));
    }
    let mut grid = SurfaceGrid::new(max.0, max.1, max.2, height);
    for (k, d, w, row) in rows {
        grid.set(k, d, w, row);
    }
    Ok(grid)
}

pub fn cmd_predict(cfg: &RunConfig) -> Result<()> {
    let seqs = load_prepared(cfg)?;
    let (model, normalizer) = load_model_for(cfg, &seqs)?;
    let dir = cfg.out.join("predictions");
    fs::create_dir_all(&dir)?;
    let mut written = Vec::new();
    for (i, seq) in seqs.iter().enumerate() {
        let normed = normalizer.normalize_sequence(seq)?;
        let preds = model.predict_sequence(&normed)?;
        let grid = tomoseg_core::models::reconstruct_surfaces(
            &preds, seq.depth, seq.layers, seq.width, seq.height,
        )?;
        let path = dir.join(format!("seq_{i:04}.csv"));
        write_surface_csv(&path, &grid)?;
        // Parse-back check.
        let back = read_surface_csv(&path, seq.height)?;
        if back != grid {
            bail!("prediction CSV verification failed for {}", path.display());
        }
        written.push(path);
    }
    println!("wrote {} prediction files to {}", written.len(), dir.display());
    Ok(())
}

pub fn cmd_eval(cfg: &RunConfig) -> Result<()> {
    let seqs = load_prepared(cfg)?;
    let (model, normalizer) = load_model_for(cfg, &seqs)?;
    let refs: Vec<&TomoSequence> = seqs.iter().collect();
    let (mut report, _) = evaluate(&model, &refs, &normalizer)?;
    report.config = cfg.echo();
    fs::create_dir_all(&cfg.out)?;
    let path = cfg.out.join("eval_report.json");
    fs::write(&path, serde_json::to_string_pretty(&report)?)?;
    // Parse-back check.
    let back: EvalReport = serde_json::from_str(&fs::read_to_string(&path)?)?;
    back.validate()?;
    println!(
        "eval: {:.3} px averaged ({} sequences, {:.2} s/seq) -> {}",
        report.averaged_error_px,
        report.sequences,
        report.inference_seconds_per_sequence,
        path.display()
    );
    Ok(())
}

pub fn cmd_ablate(cfg: &RunConfig) -> Result<()> {
    let seqs = load_prepared(cfg)?;
    let (train_idx, test_idx) = split_sequences(cfg, &seqs)?;
    let train_refs: Vec<&TomoSequence> = train_idx.iter().map(|&i| &seqs[i]).collect();
    let test_refs: Vec<&TomoSequence> = test_idx.iter().map(|&i| &seqs[i]).collect();
    let mut normalizer = PixelNormalizer::new();
    normalizer.fit(&train_refs)?;

    let mut rows = Vec::new();
    for mode in Mode::ALL {
        let model_cfg = cfg.model_config(mode)?;
        let samples = windows_for(&seqs, &train_idx, &normalizer, model_cfg.window_len)?;
        let model = CombinedModel::new(&model_cfg, cfg.seed)?;
        let started = Instant::now();
        train(&model, &samples, &cfg.train_options())?;
        let train_secs = started.elapsed().as_secs_f64();
        let (report, _) = evaluate(&model, &test_refs, &normalizer)?;
        println!(
            "ablate {mode}: {:.3} px (train {:.1} s)",
            report.averaged_error_px, train_secs
        );
        rows.push(serde_json::json!({
            "mode": mode.to_string(),
            "per_layer_error_px": report.per_layer_error_px,
            "averaged_error_px": report.averaged_error_px,
            "inference_seconds_per_sequence": report.inference_seconds_per_sequence,
            "train_seconds": train_secs,
        }));
    }

    fs::create_dir_all(&cfg.out)?;
    let path = cfg.out.join("ablation.json");
    fs::write(
        &path,
        serde_json::to_string_pretty(&serde_json::json!({
            "format_version": 1,
            "config": cfg.echo(),
            "rows": rows,
        }))?,
    )?;
    // Parse-back check.
    let back: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path)?)?;
    let n = back["rows"].as_array().map(|r| r.len()).unwrap_or(0);
    if n != Mode::ALL.len() {
        bail!("ablation verification failed: {n} rows");
    }

    println!("\n{:<10} {:>14} {:>14} {:>12}", "mode", "air err (px)", "bed err (px)", "mean (px)");
    for row in &rows {
        let per = row["per_layer_error_px"].as_array().unwrap();
        println!(
            "{:<10} {:>14.3} {:>14.3} {:>12.3}",
            row["mode"].as_str().unwrap(),
            per[0].as_f64().unwrap(),
            per.get(1).and_then(|v| v.as_f64()).unwrap_or(f64::NAN),
            row["averaged_error_px"].as_f64().unwrap(),
        );
    }
    println!("\nwrote {}", path.display());
    Ok(())
}
