use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Serialize;
use storeplace::demand::{
    extract_demand, find_demand_centers, heatmap, query_visit_correlation, CorrelationReport, DemandOutcome, Target,
    TemporalProfile, ThresholdSource,
};
use storeplace::eval::{
    feature_context, feature_rows, importance_report, leave_brand_out_eval, rank_centers, specific_split_eval,
    train_category_model, CityData, FeatureRow, Status,
};
use storeplace::geo::GeoPoint;
use storeplace::ingest::synth::generate_city;
use storeplace::ingest::{
    read_dir, write_pois, write_queries, write_wifi, RawCity, ALIASES_FILE, MANIFEST_FILE, POIS_FILE, QUERIES_FILE,
    WIFI_FILE,
};
use storeplace::{to_json, SavedModel};
use storeplace_service::{AppState, ServiceConfig};

use crate::config::{ProtocolKind, RunConfig};
use crate::error::CliError;

pub const DEMAND_CENTERS_FILE: &str = "demand_centers.json";
pub const DEMAND_REPORT_FILE: &str = "demand_report.json";
pub const HEATMAP_FILE: &str = "heatmap.json";
pub const EVAL_REPORT_FILE: &str = "eval_report.json";
pub const RANKING_FILE: &str = "ranking.json";
pub const FEATURES_FILE: &str = "features.csv";
pub const MODEL_FILE: &str = "model.json";
pub const IMPORTANCE_FILE: &str = "importance.json";

/// Write through a temporary file in the target directory, then rename.
pub fn write_atomic(path: &Path, fill: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<(), CliError> {
    let wrap = |source| CliError::Write {
        path: path.to_path_buf(),
        source,
    };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(wrap)?;
    let mut builder = tempfile::Builder::new();
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        builder.permissions(fs::Permissions::from_mode(0o644));
    }
    let mut tmp = builder.tempfile_in(dir).map_err(wrap)?;
    {
        let mut w = BufWriter::new(tmp.as_file_mut());
        fill(&mut w).map_err(wrap)?;
        w.flush().map_err(wrap)?;
    }
    tmp.as_file().sync_all().map_err(wrap)?;
    tmp.persist(path).map_err(|e| wrap(e.error))?;
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    write_atomic(path, |w| w.write_all(text.as_bytes()))
}

fn io_err(e: impl std::fmt::Display) -> io::Error {
    io::Error::other(e.to_string())
}

fn read_raw(cfg: &RunConfig) -> Result<RawCity, CliError> {
    let dir = cfg.data_dir()?;
    let raw = read_dir(dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
    let [q, p, w] = raw.rejected;
    if q + p + w > 0 {
        log::warn!("rejected malformed records: {q} queries, {p} POIs, {w} WiFi");
    }
    Ok(raw)
}

pub fn load_data(cfg: &RunConfig) -> Result<CityData, CliError> {
    Ok(CityData::from_raw(read_raw(cfg)?, cfg.params.demand.tz_offset_s))
}

fn resolve_target(cfg: &RunConfig, data: &CityData) -> Result<Target, CliError> {
    let name = cfg.target_name()?;
    Target::resolve(name, &data.pois).ok_or_else(|| CliError::Usage(format!("unknown target {name:?}")))
}

fn category_of(target: &Target, data: &CityData) -> Result<String, CliError> {
    target
        .category(&data.pois)
        .ok_or_else(|| CliError::Data(format!("target {:?} has no stores to learn from", target.name())))
}

fn status_of(outcome: &DemandOutcome) -> Status {
    if outcome.demand_points == 0 {
        Status::NoDemand
    } else if outcome.centers.is_empty() {
        Status::NoGap
    } else {
        Status::Ok
    }
}

fn report_status(status: Status) {
    if status != Status::Ok {
        log::warn!("{}", status.describe());
    }
}

pub fn synth(cfg: &RunConfig) -> Result<(), CliError> {
    let city = generate_city(&cfg.city)?;
    let out = &cfg.out;
    write_atomic(&out.join(QUERIES_FILE), |w| {
        write_queries(w, &city.queries).map_err(io_err)
    })?;
    write_atomic(&out.join(POIS_FILE), |w| write_pois(w, &city.pois).map_err(io_err))?;
    write_atomic(&out.join(WIFI_FILE), |w| write_wifi(w, &city.wifi).map_err(io_err))?;
    write_text(&out.join(ALIASES_FILE), &to_json(&cfg.city.aliases()))?;
    write_text(&out.join(MANIFEST_FILE), &to_json(&city.manifest))?;
    println!(
        "synthesized {} queries, {} POIs, {} WiFi records into {}",
        city.queries.len(),
        city.pois.len(),
        city.wifi.len(),
        out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct DemandReport<'a> {
    status: Status,
    target: &'a Target,
    seed: u64,
    demand_points: usize,
    gap_points: usize,
    centers: usize,
    threshold_m: f64,
    threshold_source: ThresholdSource,
    profile: &'a TemporalProfile,
    correlation: CorrelationReport,
}

pub fn demand(cfg: &RunConfig) -> Result<(), CliError> {
    let raw = read_raw(cfg)?;
    let correlation = query_visit_correlation(&raw.queries, &raw.wifi, &raw.pois, &cfg.correlation);
    let data = CityData::from_raw(raw, cfg.params.demand.tz_offset_s);
    let target = resolve_target(cfg, &data)?;
    let outcome = find_demand_centers(
        &data.queries,
        &data.pois,
        &target,
        &data.aliases,
        &cfg.params.demand,
        cfg.seed,
    )?;
    let points: Vec<GeoPoint> = extract_demand(&data.queries, &data.pois, &target, &data.aliases)
        .into_iter()
        .map(|p| p.location)
        .collect();
    let cells = heatmap(&points, cfg.heatmap_cell_m)?;
    let status = status_of(&outcome);
    let report = DemandReport {
        status,
        target: &target,
        seed: cfg.seed,
        demand_points: outcome.demand_points,
        gap_points: outcome.gap_points,
        centers: outcome.centers.len(),
        threshold_m: outcome.threshold_m,
        threshold_source: outcome.threshold_source,
        profile: &outcome.profile,
        correlation,
    };
    write_text(&cfg.out.join(DEMAND_CENTERS_FILE), &to_json(&outcome.centers))?;
    write_text(&cfg.out.join(DEMAND_REPORT_FILE), &to_json(&report))?;
    write_text(&cfg.out.join(HEATMAP_FILE), &to_json(&cells))?;
    report_status(status);
    println!(
        "status {}: {} demand points, {} in the gap, {} centers -> {}",
        serde_plain(status),
        outcome.demand_points,
        outcome.gap_points,
        outcome.centers.len(),
        cfg.out.join(DEMAND_CENTERS_FILE).display()
    );
    Ok(())
}

fn serde_plain(status: Status) -> String {
    to_json(&status).trim().trim_matches('"').to_string()
}

pub fn eval(cfg: &RunConfig) -> Result<(), CliError> {
    let data = load_data(cfg)?;
    let brand = match &cfg.eval.brand {
        Some(b) => b.clone(),
        None => match resolve_target(cfg, &data)? {
            Target::Brand(b) => b,
            Target::Category(c) => {
                return Err(CliError::Usage(format!(
                    "evaluation needs a brand; {c:?} is a category (set eval.brand)"
                )))
            }
        },
    };
    let category = category_of(&Target::Brand(brand.clone()), &data)?;
    let ctx = feature_context(&data, &category, &cfg.params)?;
    let report = match cfg.eval.protocol {
        ProtocolKind::LeaveBrandOut => leave_brand_out_eval(&ctx, &category, &brand, &cfg.model, cfg.k, cfg.seed)?,
        ProtocolKind::Split => specific_split_eval(
            &ctx,
            &brand,
            &cfg.model,
            cfg.k,
            cfg.eval.test_fraction,
            cfg.eval.repeats,
            cfg.seed,
        )?,
    };
    let path = cfg.out.join(EVAL_REPORT_FILE);
    write_text(&path, &to_json(&report))?;
    println!(
        "{} on {brand}: nDCG@{k} {:.4} (random {:.4}), nSD@{k} {:.4} (random {:.4}) -> {}",
        report.model.name(),
        report.ndcg,
        report.baseline.ndcg,
        report.nsd,
        report.baseline.nsd,
        path.display(),
        k = report.k,
    );
    Ok(())
}

fn load_model(path: &Path) -> Result<SavedModel, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("model file {}: {e}", path.display())))?;
    SavedModel::from_json(&text).map_err(|e| CliError::Usage(format!("model file {}: {e}", path.display())))
}

pub fn rank(cfg: &RunConfig) -> Result<(), CliError> {
    let loaded = cfg.model_file.as_deref().map(load_model).transpose()?;
    let data = load_data(cfg)?;
    let target = resolve_target(cfg, &data)?;
    let outcome = find_demand_centers(
        &data.queries,
        &data.pois,
        &target,
        &data.aliases,
        &cfg.params.demand,
        cfg.seed,
    )?;
    let status = status_of(&outcome);
    let ranking_path = cfg.out.join(RANKING_FILE);
    if status != Status::Ok {
        write_text(&ranking_path, &to_json(&Vec::<()>::new()))?;
        report_status(status);
        println!(
            "status {}: no candidates -> {}",
            serde_plain(status),
            ranking_path.display()
        );
        return Ok(());
    }
    let category = category_of(&target, &data)?;
    let ctx = feature_context(&data, &category, &cfg.params)?;
    let (model, trained) = match loaded {
        Some(m) => (m, false),
        None => (train_category_model(&ctx, &category, &cfg.model, cfg.seed)?, true),
    };
    let mut ranking = rank_centers(&ctx, &outcome.centers, &model)?;
    if let Some(k) = cfg.params.top_k {
        ranking.truncate(k);
    }
    let rows = feature_rows(&ctx, &category, &outcome.centers);
    let mut csv = Vec::new();
    FeatureRow::write_csv(&rows, &mut csv).map_err(|e| CliError::Data(e.to_string()))?;
    write_text(&ranking_path, &to_json(&ranking))?;
    write_atomic(&cfg.out.join(FEATURES_FILE), |w| w.write_all(&csv))?;
    if trained {
        let json = model.to_json().map_err(|e| CliError::Data(e.to_string()))?;
        write_text(&cfg.out.join(MODEL_FILE), &json)?;
    }
    println!(
        "ranked {} candidates for {} with {} -> {}",
        ranking.len(),
        target.name(),
        model.spec.name(),
        ranking_path.display()
    );
    Ok(())
}

pub fn importance(cfg: &RunConfig) -> Result<(), CliError> {
    let data = load_data(cfg)?;
    let target = resolve_target(cfg, &data)?;
    let category = category_of(&target, &data)?;
    let ctx = feature_context(&data, &category, &cfg.params)?;
    let report = importance_report(&ctx, &category, &cfg.model, cfg.seed)?;
    let path = cfg.out.join(IMPORTANCE_FILE);
    write_text(&path, &to_json(&report))?;
    for f in &report.features {
        println!("{:<22} {:.4}", f.name, f.weight);
    }
    Ok(())
}

pub fn serve(cfg: &RunConfig) -> Result<(), CliError> {
    let dir: PathBuf = cfg.data_dir()?.to_path_buf();
    let service = ServiceConfig {
        params: cfg.params.clone(),
        default_spec: cfg.model,
        workers: cfg.threads.unwrap_or_else(|| ServiceConfig::default().workers),
        job_after: Duration::from_secs_f64(cfg.serve.job_after_s),
        cors_origins: cfg.serve.cors_origins.clone(),
    };
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::Data(format!("cannot start runtime: {e}")))?;
    rt.block_on(async {
        let addr = format!("{}:{}", cfg.serve.host, cfg.serve.port);
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .map_err(|e| CliError::Usage(format!("cannot listen on {addr}: {e}")))?;
        let local = listener.local_addr().map_err(|e| CliError::Usage(e.to_string()))?;
        let state = AppState::new(service);
        let (fail_tx, fail_rx) = tokio::sync::oneshot::channel::<CliError>();
        let loader = state.clone();
        let load_cfg = RunConfig {
            data: Some(dir),
            ..cfg.clone()
        };
        tokio::task::spawn_blocking(move || match load_data(&load_cfg) {
            Ok(data) => {
                log::info!("loaded {} POIs and {} queries", data.pois.len(), data.queries.len());
                loader.load(data);
            }
            Err(e) => {
                let _ = fail_tx.send(e);
            }
        });
        println!("listening on http://{local}");
        let _ = io::stdout().flush();
        let (stop_tx, stop_rx) = tokio::sync::oneshot::channel::<Option<CliError>>();
        tokio::spawn(async move {
            let reason = tokio::select! {
                _ = tokio::signal::ctrl_c() => None,
                Ok(e) = fail_rx => Some(e),
            };
            let _ = stop_tx.send(reason);
        });
        let (done_tx, done_rx) = tokio::sync::oneshot::channel::<Option<CliError>>();
        let shutdown = async move {
            let reason = stop_rx.await.unwrap_or(None);
            log::info!("shutting down");
            let _ = done_tx.send(reason);
        };
        storeplace_service::serve(listener, state, shutdown)
            .await
            .map_err(|e| CliError::Data(format!("server error: {e}")))?;
        match done_rx.await {
            Ok(Some(e)) => Err(e),
            _ => Ok(()),
        }
    })
}
