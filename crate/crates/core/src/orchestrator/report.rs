//! Deterministic decision report: a fixed eight-section template filled from
//! one packet. Pure; the same packet always renders the same text.

use std::fmt::Write;

use super::engine::DecisionPacket;
use crate::agents::Modality;
use crate::error::Result;
use crate::handover::{BsId, Trigger};

pub const REPORT_SECTIONS: [&str; 8] = [
    "Environment Status",
    "Modality Selections",
    "DRL Agent Selection",
    "Trajectory",
    "Blockage Status",
    "Handover Status",
    "Predicted Beam and Properties",
    "Perception",
];

/// Slot in the two-BS arrays.
fn slot(bs: BsId) -> usize {
    match bs {
        BsId::Unit1 => 0,
        BsId::Bs2 => 1,
    }
}

fn names(mods: impl Iterator<Item = Modality>) -> String {
    let v: Vec<&str> = mods.map(|m| m.name()).collect();
    if v.is_empty() {
        "none".into()
    } else {
        v.join(", ")
    }
}

fn section(out: &mut String, i: usize) {
    if i > 0 {
        out.push('\n');
    }
    let _ = writeln!(out, "{}. {}", i + 1, REPORT_SECTIONS[i]);
}

pub fn render_report(p: &DecisionPacket) -> String {
    let mut o = String::new();
    let degraded = || Modality::ALL.into_iter().filter(|m| p.smoothed.persistent[m.index()]);

    section(&mut o, 0);
    let _ = writeln!(o, "- Tick {} at t = {:.3} s", p.tick, p.time_s);
    for m in Modality::ALL {
        let k = m.index();
        let _ = writeln!(
            o,
            "- {:<6} flag {:<8} window share {:.2}  long-term share {:.3}{}",
            m.name(),
            if p.flags.get(m) { "degraded" } else { "clean" },
            p.smoothed.fraction[k],
            p.memory.degraded_fraction[k],
            if p.smoothed.persistent[k] { "  persistent" } else { "" }
        );
    }
    let _ = writeln!(o, "- Persistent degradation: {}", names(degraded()));

    section(&mut o, 1);
    let _ = writeln!(o, "- Beam prediction: {} ({})", p.action.beam, names(p.action.beam.modalities()));
    let _ = writeln!(o, "- Blockage prediction: {} ({})", p.action.block, names(p.action.block.modalities()));
    let _ = writeln!(o, "- Excluded as degraded: {}", names(degraded()));

    section(&mut o, 2);
    let _ = writeln!(o, "- Policy: {}", p.policy);
    let _ = writeln!(o, "- Perceived state: {}", p.state);
    let _ = writeln!(o, "- Expected reward: {:.4}", p.expected_reward);

    section(&mut o, 3);
    let _ = writeln!(
        o,
        "- Unit 2 position: lat {:.6}, lon {:.6}",
        p.trajectory.position.lat, p.trajectory.position.lon
    );
    for bs in [BsId::Unit1, BsId::Bs2] {
        let i = slot(bs);
        let _ = writeln!(
            o,
            "- {bs}: distance {:.1} m, bearing {:.1} deg, {}",
            p.trajectory.distance_m[i],
            p.trajectory.bearing_deg[i],
            if p.trajectory.los[i] { "LoS" } else { "NLoS" }
        );
    }

    section(&mut o, 4);
    let probs: Vec<String> = p.blockage.fused.probs.iter().map(|x| format!("{x:.3}")).collect();
    let _ = writeln!(o, "- Fused blockage probability t+1..t+5: [{}]", probs.join(", "));
    let _ = writeln!(
        o,
        "- Verdict on the Unit 1 link: {}",
        if p.blockage.verdict { "blocked" } else { "clear" }
    );
    let _ = writeln!(
        o,
        "- Consecutive blocked windows: {} (handover flag {})",
        p.memory.blockage_run,
        if p.memory.handover_flag { "raised" } else { "not raised" }
    );

    section(&mut o, 5);
    match &p.handover {
        Some(h) => {
            let from = h.target.other();
            let trigger = match h.trigger {
                Trigger::PowerSuperiority => "power superiority",
                Trigger::BlockageAware => "blockage-aware",
            };
            let _ = writeln!(
                o,
                "- Handover from {from} to {}: power difference {:+.2} dB ({} {:.2} dBm vs {from} {:.2} dBm)",
                h.target,
                h.gain_db,
                h.target,
                p.beams[slot(h.target)].received_dbm,
                p.beams[slot(from)].received_dbm
            );
            let _ = writeln!(o, "- Trigger: {trigger}, confidence {:.3}", h.confidence);
        }
        None => {
            let other = p.serving.other();
            let _ = writeln!(
                o,
                "- Stay on {}: {other} differs by {:+.2} dB",
                p.serving,
                p.beams[slot(other)].received_dbm - p.beams[slot(p.serving)].received_dbm
            );
        }
    }

    section(&mut o, 6);
    for b in &p.beams {
        let top: Vec<String> = b.prediction.indices.iter().map(|i| i.to_string()).collect();
        let _ = writeln!(
            o,
            "- {}: beam {} (center {:+.2} deg, width {:.2} deg), gain {:.2} dB, received {:.2} dBm, top-3 [{}]",
            b.bs,
            b.beam,
            b.center_deg,
            b.width_deg,
            b.gain_db,
            b.received_dbm,
            top.join(", ")
        );
    }

    section(&mut o, 7);
    let active = Modality::ALL
        .into_iter()
        .filter(|m| p.action.beam.contains(*m) || p.action.block.contains(*m));
    let _ = writeln!(o, "- Sensors in use: {}", names(active));
    let l = &p.latency;
    let _ = writeln!(
        o,
        "- Critical path: invocation {:.2} ms + max(beam {:.2}, blockage {:.2}) ms + serial {:.2} ms = {:.2} ms of {:.2} ms budget ({})",
        l.invocation_ms,
        l.beam_ms,
        l.block_ms,
        l.serial_ms,
        l.critical_path_ms,
        l.budget_ms,
        if l.over_budget { "over budget" } else { "within budget" }
    );
    let _ = writeln!(o, "- Response generation: {:.2} ms, asynchronous", l.async_response_ms);
    o
}

/// Reports for a packet stream, separated by a rule line.
pub fn render_reports(packets: &[DecisionPacket]) -> String {
    packets
        .iter()
        .map(render_report)
        .collect::<Vec<_>>()
        .join("\n----\n\n")
}

/// Boundary for an external reasoning model: reads a rendered report or
/// operator prompt and returns a structured packet. No implementation ships;
/// the deterministic engine fills this role.
pub trait ReasoningAdapter {
    fn name(&self) -> &str;
    fn interpret(&self, prompt: &str) -> Result<DecisionPacket>;
}
