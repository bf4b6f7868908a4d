use pitchgraph_core::teamcluster::{cluster_players, purity, train_player_classifier, FramePeople, Person, PlayerClass, Sample, SampleId};

use super::artifacts::{PeopleArtifact, TeamsArtifact};
use super::Stage;
use crate::config::PipelineConfig;
use crate::error::Result;
use crate::formats::tables;
use crate::fsutil;

pub(super) fn run(cfg: &PipelineConfig) -> Result<String> {
    let cache = &cfg.paths.cache_dir;
    let people: PeopleArtifact = fsutil::read_json(&Stage::Ingest.artifact(cache))?;
    let frames: Vec<FramePeople> = people
        .kept()
        .map(|f| FramePeople {
            frame_index: f.frame_index,
            people: f
                .people
                .iter()
                .map(|p| Person { sample: Sample { id: SampleId::new(f.frame_index, p.detection_id), hist: p.hist.clone() }, position: p.position })
                .collect(),
        })
        .collect();
    let outcome = cluster_players(&frames, &cfg.pitch, &cfg.teamcluster, cfg.seed)?;
    let mut clusters = outcome.clusters;
    let purity = match &cfg.paths.labels {
        Some(path) => {
            let labels = tables::load_labels(path)?;
            // Team names are arbitrary; follow the labels before scoring.
            clusters.align_teams_to(&labels);
            Some(purity(&clusters, &labels)?)
        }
        None => None,
    };
    let (classifier, report) = train_player_classifier(&clusters, &cfg.classifier, cfg.seed)?;
    let sizes: Vec<String> = PlayerClass::ALL.iter().map(|&c| clusters.get(c).len().to_string()).collect();
    let mut summary = format!(
        "teams: {} clustered samples ({}), validation accuracy {}",
        clusters.len(),
        sizes.join("/"),
        report.validation_accuracy.map_or("n/a".to_string(), |a| format!("{a:.2}%"))
    );
    if let Some(p) = &purity {
        summary.push_str(&format!(", purity {:.2}%", p.overall));
    }
    let artifact = TeamsArtifact {
        clusters,
        classifier,
        report,
        midfield_frames: outcome.midfield_frames,
        midfield_samples: outcome.midfield_samples,
        keeper_candidates: outcome.keeper_candidates,
        unlabeled_sides: outcome.unlabeled_sides,
        purity,
    };
    fsutil::write_json(&Stage::Teams.artifact(cache), &artifact)?;
    Ok(summary)
}
