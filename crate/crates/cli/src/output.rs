//! Artifact writers: class dumps as JSON lines, geometry CSVs.

use anyhow::{Context, Result};
use horseshoe_core::config::RunConfig;
use horseshoe_core::family::ModelFamily;
use horseshoe_core::rclass::RClass;
use horseshoe_core::word::{parse_word, Word};
use std::io::Write;
use std::path::Path;

/// One element per line: word, length, prime count, widths, criticality
/// flags and parent word, in the deterministic class order.
pub fn write_class_dump(path: &Path, class: &RClass) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for word in class.sorted_words() {
        let e = class.get(&word).expect("sorted word stored");
        let flags = if touches_special(class, e) {
            let f = class.flags(&word);
            serde_json::json!({
                "p_critical": f.p_critical,
                "q_critical": f.q_critical,
                "bicritical": f.bicritical,
            })
        } else {
            serde_json::json!({
                "p_critical": false,
                "q_critical": false,
                "bicritical": false,
            })
        };
        let line = serde_json::json!({
            "word": word.to_string(),
            "n": e.n,
            "r": e.r,
            "widths": {"P": e.p_width, "Q": e.q_width},
            "flags": flags,
            "parent_word": e.parent.as_ref().map(|w| w.to_string()),
        });
        writeln!(out, "{line}")?;
    }
    Ok(())
}

fn touches_special(class: &RClass, e: &horseshoe_core::rclass::Element) -> bool {
    use horseshoe_core::rclass::{p_contained, q_contained};
    (e.in_p_s || p_contained(&class.p_s_word, &e.word))
        && (e.in_q_u || q_contained(&class.q_u_word, &e.word))
}

/// Words of a previous dump, for the resume path.
pub fn read_dump_words(path: &Path) -> Result<Vec<Word>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading dump {}", path.display()))?;
    let mut words = Vec::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(line).context("parsing dump line")?;
        let w = value
            .get("word")
            .and_then(|v| v.as_str())
            .context("dump line without a word")?;
        words.push(parse_word(w).with_context(|| format!("malformed word {w}"))?);
    }
    Ok(words)
}

/// Markov rectangles, branch strips and tongue boundaries as CSV polylines:
/// `kind,chart,index,y,x` rows.
pub fn write_geometry(dir: &Path, cfg: &RunConfig, fam: ModelFamily) -> Result<()> {
    let mut csv = String::from("kind,chart,index,y,x\n");
    let rect = fam.chart_rect;
    for chart in fam.alphabet() {
        let corners = [
            (rect.y.lo, rect.x.lo),
            (rect.y.lo, rect.x.hi),
            (rect.y.hi, rect.x.hi),
            (rect.y.hi, rect.x.lo),
            (rect.y.lo, rect.x.lo),
        ];
        for (i, (y, x)) in corners.iter().enumerate() {
            csv.push_str(&format!("rectangle,{chart},{i},{y:.9},{x:.9}\n"));
        }
        for (a, b) in fam.transitions() {
            if a != chart {
                continue;
            }
            let m = fam.strip_origin(a, b);
            let l = fam.config.lambda_s;
            let pts = [
                (rect.y.lo, m),
                (rect.y.hi, m),
                (rect.y.hi, m + l),
                (rect.y.lo, m + l),
                (rect.y.lo, m),
            ];
            for (i, (y, x)) in pts.iter().enumerate() {
                csv.push_str(&format!("strip_{a}{b},{chart},{i},{y:.9},{x:.9}\n"));
            }
        }
    }
    let t = cfg.t.unwrap_or(1.5 * cfg.constants.eps0);
    if let Ok(tongues) = fam.tongues(t) {
        for (i, (x, y)) in tongues.l_u.iter().enumerate() {
            csv.push_str(&format!("tongue_u,{},{i},{y:.9},{x:.9}\n", fam.a_u));
        }
        for (i, (x, y)) in tongues.l_s.iter().enumerate() {
            csv.push_str(&format!("tongue_s,{},{i},{y:.9},{x:.9}\n", fam.a_s));
        }
    }
    std::fs::write(dir.join("geometry.csv"), csv)?;
    Ok(())
}

/// Per-level build summary; criticality outcomes are counted over the
/// bicriticality candidates (elements meeting both special rectangles).
#[derive(Debug, Clone, serde::Serialize)]
pub struct ClassSummary {
    pub level: usize,
    pub elements: usize,
    pub parabolic: usize,
    pub candidates: usize,
    pub critical: usize,
    pub undetermined: usize,
    pub transverse: usize,
}

pub fn class_summary(class: &RClass) -> ClassSummary {
    use horseshoe_core::transversality::Criticality;
    let mut summary = ClassSummary {
        level: class.interval.level,
        elements: class.len(),
        parabolic: 0,
        candidates: 0,
        critical: 0,
        undetermined: 0,
        transverse: 0,
    };
    for e in class.elements() {
        if e.word.contains_block() {
            summary.parabolic += 1;
        }
        if !touches_special(class, e) {
            continue;
        }
        summary.candidates += 1;
        match (class.q_criticality(&e.word), class.p_criticality(&e.word)) {
            (Criticality::Undetermined, _) | (_, Criticality::Undetermined) => {
                summary.undetermined += 1
            }
            (Criticality::Critical(_), Criticality::Critical(_)) => summary.critical += 1,
            _ => summary.transverse += 1,
        }
    }
    summary
}
