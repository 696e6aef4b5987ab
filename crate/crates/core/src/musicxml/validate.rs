//! Structural validation against the MusicXML 3.1 partwise content model.
//!
//! Covers the element subset this exporter can emit: child ordering per
//! the 3.1 sequences, required children and attributes, value ranges,
//! start/stop pairing of spanning notations, duration/type consistency,
//! and per-voice measure arithmetic (note and rest durations must fill
//! each measure exactly, through `backup`/`forward`). Elements outside
//! the known subset are reported as errors, so a document that passes is
//! genuinely well-formed for notation software.

use roxmltree::Node;

/// Validate a serialized MusicXML document. Returns every violation found.
pub fn validate_musicxml(xml: &str) -> Result<(), Vec<String>> {
    let mut v = Validator::default();
    match super::parse_doc(xml) {
        Ok(doc) => {
            let root = doc.root_element();
            if root.tag_name().name() != "score-partwise" {
                v.errors.push("root element must be score-partwise".into());
            } else {
                v.score_partwise(&root);
            }
        }
        Err(e) => v.errors.push(format!("document is not well-formed XML: {e}")),
    }
    if v.errors.is_empty() {
        Ok(())
    } else {
        Err(v.errors)
    }
}

#[derive(Default)]
struct Validator {
    errors: Vec<String>,
}

/// Checks that children appear in non-decreasing rank order and that every
/// child is known. `ranks` maps element name to its position in the
/// model's sequence.
fn check_order(v: &mut Validator, node: &Node, ranks: &[(&str, u32)], context: &str) {
    let mut last = 0u32;
    let mut last_name = String::new();
    for child in node.children().filter(|c| c.is_element()) {
        let name = child.tag_name().name();
        match ranks.iter().find(|(n, _)| *n == name) {
            Some(&(_, rank)) => {
                if rank < last {
                    v.errors.push(format!(
                        "{context}: <{name}> may not follow <{last_name}>"
                    ));
                }
                last = rank;
                last_name = name.to_string();
            }
            None => v.errors.push(format!("{context}: unexpected element <{name}>")),
        }
    }
}

fn int_text(node: &Node) -> Option<i64> {
    node.text().and_then(|t| t.trim().parse().ok())
}

fn float_text(node: &Node) -> Option<f64> {
    node.text().and_then(|t| t.trim().parse().ok())
}

fn child<'a, 'b>(node: &'a Node<'a, 'b>, name: &str) -> Option<Node<'a, 'b>> {
    node.children().find(|c| c.has_tag_name(name))
}

impl Validator {
    fn score_partwise(&mut self, root: &Node) {
        if root.attribute("version").is_none() {
            self.errors.push("score-partwise: missing version attribute".into());
        }
        check_order(
            self,
            root,
            &[
                ("work", 1),
                ("movement-number", 2),
                ("movement-title", 3),
                ("identification", 4),
                ("defaults", 5),
                ("credit", 6),
                ("part-list", 7),
                ("part", 8),
            ],
            "score-partwise",
        );
        if let Some(ident) = child(root, "identification") {
            self.identification(&ident);
        }
        let mut part_ids: Vec<String> = Vec::new();
        match child(root, "part-list") {
            None => self.errors.push("score-partwise: missing part-list".into()),
            Some(part_list) => {
                for sp in part_list.children().filter(|c| c.is_element()) {
                    match sp.tag_name().name() {
                        "score-part" => {
                            match sp.attribute("id") {
                                Some(id) => part_ids.push(id.to_string()),
                                None => self
                                    .errors
                                    .push("score-part: missing id attribute".into()),
                            }
                            if child(&sp, "part-name").is_none() {
                                self.errors.push("score-part: missing part-name".into());
                            }
                        }
                        "part-group" => {}
                        other => self
                            .errors
                            .push(format!("part-list: unexpected element <{other}>")),
                    }
                }
                if part_ids.is_empty() {
                    self.errors.push("part-list: no score-part entries".into());
                }
            }
        }
        let parts: Vec<Node> = root.children().filter(|c| c.has_tag_name("part")).collect();
        if parts.is_empty() {
            self.errors.push("score-partwise: no part elements".into());
        }
        for part in parts {
            match part.attribute("id") {
                Some(id) if part_ids.iter().any(|p| p == id) => {}
                Some(id) => self.errors.push(format!("part {id}: not declared in part-list")),
                None => self.errors.push("part: missing id attribute".into()),
            }
            self.part(&part);
        }
    }

    fn identification(&mut self, node: &Node) {
        check_order(
            self,
            node,
            &[
                ("creator", 1),
                ("rights", 2),
                ("encoding", 3),
                ("source", 4),
                ("relation", 5),
                ("miscellaneous", 6),
            ],
            "identification",
        );
        if let Some(encoding) = child(node, "encoding") {
            for c in encoding.children().filter(|c| c.is_element()) {
                let name = c.tag_name().name();
                if !matches!(
                    name,
                    "encoding-date" | "encoder" | "software" | "encoding-description" | "supports"
                ) {
                    self.errors.push(format!("encoding: unexpected element <{name}>"));
                }
            }
        }
        if let Some(misc) = child(node, "miscellaneous") {
            for c in misc.children().filter(|c| c.is_element()) {
                if c.tag_name().name() != "miscellaneous-field" {
                    self.errors.push("miscellaneous: only miscellaneous-field allowed".into());
                } else if c.attribute("name").is_none() {
                    self.errors.push("miscellaneous-field: missing name attribute".into());
                }
            }
        }
    }

    fn part(&mut self, part: &Node) {
        let part_id = part.attribute("id").unwrap_or("?").to_string();
        let mut divisions: Option<u64> = None;
        let mut capacity: Option<u64> = None;
        let mut beats: u64 = 4;
        let mut beat_type: u64 = 4;
        // Open start/stop counts for spanning notations, per element kind.
        let mut open: std::collections::BTreeMap<&'static str, i64> = Default::default();

        for (m_idx, measure) in part.children().filter(|c| c.has_tag_name("measure")).enumerate() {
            if measure.attribute("number").is_none() {
                self.errors.push(format!("part {part_id}: measure without number"));
            }
            let ctx = format!("part {part_id} measure {}", m_idx + 1);
            let mut cursor: i64 = 0;
            let mut max_cursor: i64 = 0;
            let mut voice_sums: std::collections::BTreeMap<String, i64> = Default::default();

            for item in measure.children().filter(|c| c.is_element()) {
                match item.tag_name().name() {
                    "attributes" => {
                        self.attributes(&item, &ctx, &mut divisions, &mut beats, &mut beat_type);
                        if let Some(d) = divisions {
                            let units = beats * 4 * d;
                            if !units.is_multiple_of(beat_type) {
                                self.errors.push(format!(
                                    "{ctx}: {beats}/{beat_type} not representable at divisions {d}"
                                ));
                            }
                            capacity = Some(units / beat_type);
                        }
                    }
                    "note" => {
                        let (dur, is_chord, voice) =
                            self.note(&item, &ctx, divisions, &mut open);
                        if !is_chord {
                            cursor += dur;
                        }
                        max_cursor = max_cursor.max(cursor);
                        if let Some(v) = voice {
                            *voice_sums.entry(v).or_insert(0) += dur;
                        }
                    }
                    "backup" => match child(&item, "duration").as_ref().and_then(int_text) {
                        Some(d) if d > 0 => {
                            cursor -= d;
                            if cursor < 0 {
                                self.errors.push(format!("{ctx}: backup before measure start"));
                            }
                        }
                        _ => self.errors.push(format!("{ctx}: backup without valid duration")),
                    },
                    "forward" => match child(&item, "duration").as_ref().and_then(int_text) {
                        Some(d) if d > 0 => {
                            cursor += d;
                            max_cursor = max_cursor.max(cursor);
                        }
                        _ => self.errors.push(format!("{ctx}: forward without valid duration")),
                    },
                    "sound" => {
                        if let Some(t) = item.attribute("tempo") {
                            if t.parse::<f64>().map(|v| v <= 0.0).unwrap_or(true) {
                                self.errors.push(format!("{ctx}: invalid sound tempo {t}"));
                            }
                        }
                    }
                    "direction" | "barline" | "print" | "harmony" | "figured-bass"
                    | "grouping" | "link" | "bookmark" => {}
                    other => self.errors.push(format!("{ctx}: unexpected element <{other}>")),
                }
            }

            match capacity {
                None => self.errors.push(format!("{ctx}: no divisions/time established")),
                Some(cap) => {
                    if max_cursor != cap as i64 {
                        self.errors.push(format!(
                            "{ctx}: content spans {max_cursor} units, capacity is {cap}"
                        ));
                    }
                    for (voice, sum) in &voice_sums {
                        if *sum != cap as i64 {
                            self.errors.push(format!(
                                "{ctx}: voice {voice} sums to {sum} units, capacity is {cap}"
                            ));
                        }
                    }
                }
            }
        }

        for (kind, count) in open {
            if count != 0 {
                self.errors.push(format!(
                    "part {part_id}: unbalanced {kind} start/stop (open count {count})"
                ));
            }
        }
    }

    fn attributes(
        &mut self,
        node: &Node,
        ctx: &str,
        divisions: &mut Option<u64>,
        beats: &mut u64,
        beat_type: &mut u64,
    ) {
        check_order(
            self,
            node,
            &[
                ("footnote", 1),
                ("level", 2),
                ("divisions", 3),
                ("key", 4),
                ("time", 5),
                ("staves", 6),
                ("part-symbol", 7),
                ("instruments", 8),
                ("clef", 9),
                ("staff-details", 10),
                ("transpose", 11),
                ("directive", 12),
                ("measure-style", 13),
            ],
            &format!("{ctx} attributes"),
        );
        if let Some(d) = child(node, "divisions") {
            match int_text(&d) {
                Some(v) if v > 0 => *divisions = Some(v as u64),
                _ => self.errors.push(format!("{ctx}: divisions must be a positive integer")),
            }
        }
        if let Some(key) = child(node, "key") {
            match child(&key, "fifths").as_ref().and_then(int_text) {
                Some(f) if (-7..=7).contains(&f) => {}
                _ => self.errors.push(format!("{ctx}: key needs fifths in -7..=7")),
            }
        }
        if let Some(time) = child(node, "time") {
            let b = child(&time, "beats").as_ref().and_then(int_text);
            let bt = child(&time, "beat-type").as_ref().and_then(int_text);
            match (b, bt) {
                (Some(b), Some(bt)) if b > 0 && bt > 0 => {
                    *beats = b as u64;
                    *beat_type = bt as u64;
                }
                _ => self.errors.push(format!("{ctx}: time needs positive beats and beat-type")),
            }
        }
        for clef in node.children().filter(|c| c.has_tag_name("clef")) {
            check_order(
                self,
                &clef,
                &[("sign", 1), ("line", 2), ("clef-octave-change", 3)],
                &format!("{ctx} clef"),
            );
            match child(&clef, "sign").and_then(|s| s.text().map(str::to_string)) {
                Some(sign)
                    if matches!(
                        sign.trim(),
                        "G" | "F" | "C" | "TAB" | "percussion" | "jianpu" | "none"
                    ) => {}
                _ => self.errors.push(format!("{ctx}: clef with missing or unknown sign")),
            }
        }
        for details in node.children().filter(|c| c.has_tag_name("staff-details")) {
            check_order(
                self,
                &details,
                &[
                    ("staff-type", 1),
                    ("staff-lines", 2),
                    ("staff-tuning", 3),
                    ("capo", 4),
                    ("staff-size", 5),
                ],
                &format!("{ctx} staff-details"),
            );
            let lines = child(&details, "staff-lines").as_ref().and_then(int_text).unwrap_or(5);
            for tuning in details.children().filter(|c| c.has_tag_name("staff-tuning")) {
                match tuning.attribute("line").and_then(|l| l.parse::<i64>().ok()) {
                    Some(l) if l >= 1 && l <= lines => {}
                    _ => self.errors.push(format!("{ctx}: staff-tuning line out of range")),
                }
                check_order(
                    self,
                    &tuning,
                    &[("tuning-step", 1), ("tuning-alter", 2), ("tuning-octave", 3)],
                    &format!("{ctx} staff-tuning"),
                );
                if child(&tuning, "tuning-step").is_none()
                    || child(&tuning, "tuning-octave").is_none()
                {
                    self.errors
                        .push(format!("{ctx}: staff-tuning needs tuning-step and tuning-octave"));
                }
            }
        }
    }

    /// Returns (duration, is_chord, voice).
    fn note(
        &mut self,
        node: &Node,
        ctx: &str,
        divisions: Option<u64>,
        open: &mut std::collections::BTreeMap<&'static str, i64>,
    ) -> (i64, bool, Option<String>) {
        check_order(
            self,
            node,
            &[
                ("grace", 1),
                ("chord", 2),
                ("pitch", 3),
                ("unpitched", 3),
                ("rest", 3),
                ("duration", 4),
                ("tie", 5),
                ("instrument", 6),
                ("footnote", 7),
                ("level", 8),
                ("voice", 9),
                ("type", 10),
                ("dot", 11),
                ("accidental", 12),
                ("time-modification", 13),
                ("stem", 14),
                ("notehead", 15),
                ("notehead-text", 16),
                ("staff", 17),
                ("beam", 18),
                ("notations", 19),
                ("lyric", 20),
                ("play", 21),
            ],
            &format!("{ctx} note"),
        );
        let is_grace = child(node, "grace").is_some();
        let is_chord = child(node, "chord").is_some();
        let full_note_kinds =
            ["pitch", "rest", "unpitched"].iter().filter(|k| child(node, k).is_some()).count();
        if full_note_kinds != 1 {
            self.errors
                .push(format!("{ctx}: note needs exactly one of pitch/rest/unpitched"));
        }
        if let Some(pitch) = child(node, "pitch") {
            self.pitch(&pitch, ctx);
        }
        let duration = match child(node, "duration").as_ref().and_then(int_text) {
            Some(d) if d > 0 => d,
            Some(_) => {
                self.errors.push(format!("{ctx}: note duration must be positive"));
                0
            }
            None if is_grace => 0,
            None => {
                self.errors.push(format!("{ctx}: non-grace note without duration"));
                0
            }
        };
        let ties: Vec<Node> = node.children().filter(|c| c.has_tag_name("tie")).collect();
        if ties.len() > 2 {
            self.errors.push(format!("{ctx}: more than two tie elements"));
        }
        for tie in &ties {
            match tie.attribute("type") {
                Some("start") => *open.entry("tie").or_insert(0) += 1,
                Some("stop") => {
                    let c = open.entry("tie").or_insert(0);
                    *c -= 1;
                    if *c < 0 {
                        self.errors.push(format!("{ctx}: tie stop without start"));
                    }
                }
                _ => self.errors.push(format!("{ctx}: tie needs type start|stop")),
            }
        }

        // duration must equal the displayed value when a type is present.
        if let (Some(d), Some(type_node)) = (divisions, child(node, "type")) {
            let type_text = type_node.text().unwrap_or("").trim().to_string();
            if let Some(den) = type_denominator(&type_text) {
                let dots = node.children().filter(|c| c.has_tag_name("dot")).count() as u32;
                let mut num = 4 * d as i64 * ((1i64 << (dots + 1)) - 1);
                let mut denom = den as i64 * (1i64 << dots);
                if let Some(tm) = child(node, "time-modification") {
                    check_order(
                        self,
                        &tm,
                        &[("actual-notes", 1), ("normal-notes", 2), ("normal-type", 3), ("normal-dot", 4)],
                        &format!("{ctx} time-modification"),
                    );
                    let actual = child(&tm, "actual-notes").as_ref().and_then(int_text);
                    let normal = child(&tm, "normal-notes").as_ref().and_then(int_text);
                    match (actual, normal) {
                        (Some(a), Some(n)) if a > 0 && n > 0 => {
                            num *= n;
                            denom *= a;
                        }
                        _ => self.errors.push(format!(
                            "{ctx}: time-modification needs positive actual/normal notes"
                        )),
                    }
                }
                if num % denom != 0 || num / denom != duration {
                    self.errors.push(format!(
                        "{ctx}: duration {duration} does not match type {type_text} ({} expected)",
                        num as f64 / denom as f64
                    ));
                }
            } else {
                self.errors.push(format!("{ctx}: unknown note type {type_text}"));
            }
        }

        for notations in node.children().filter(|c| c.has_tag_name("notations")) {
            self.notations(&notations, ctx, open);
        }

        let voice = child(node, "voice").and_then(|v| v.text().map(|t| t.trim().to_string()));
        (duration, is_chord, voice)
    }

    fn pitch(&mut self, node: &Node, ctx: &str) {
        check_order(self, node, &[("step", 1), ("alter", 2), ("octave", 3)], &format!("{ctx} pitch"));
        match child(node, "step").and_then(|s| s.text().map(str::to_string)) {
            Some(s) if matches!(s.trim(), "A" | "B" | "C" | "D" | "E" | "F" | "G") => {}
            _ => self.errors.push(format!("{ctx}: pitch step must be A..G")),
        }
        if let Some(alter) = child(node, "alter") {
            if float_text(&alter).is_none() {
                self.errors.push(format!("{ctx}: pitch alter must be numeric"));
            }
        }
        match child(node, "octave").as_ref().and_then(int_text) {
            Some(o) if (-1..=9).contains(&o) => {}
            _ => self.errors.push(format!("{ctx}: pitch octave out of range")),
        }
    }

    fn track_span(
        &mut self,
        open: &mut std::collections::BTreeMap<&'static str, i64>,
        ctx: &str,
        kind: &'static str,
        typ: Option<&str>,
    ) {
        match typ {
            Some("start") => *open.entry(kind).or_insert(0) += 1,
            Some("stop") => {
                let c = open.entry(kind).or_insert(0);
                *c -= 1;
                if *c < 0 {
                    self.errors.push(format!("{ctx}: {kind} stop without start"));
                }
            }
            Some("continue") => {}
            _ => self.errors.push(format!("{ctx}: {kind} needs type start|stop")),
        }
    }

    fn notations(
        &mut self,
        node: &Node,
        ctx: &str,
        open: &mut std::collections::BTreeMap<&'static str, i64>,
    ) {
        for c in node.children().filter(|c| c.is_element()) {
            match c.tag_name().name() {
                "tied" => self.track_span(open, ctx, "tied", c.attribute("type")),
                "slide" | "glissando" => self.track_span(open, ctx, "slide", c.attribute("type")),
                "slur" => self.track_span(open, ctx, "slur", c.attribute("type")),
                "ornaments" => {
                    for o in c.children().filter(|c| c.is_element()) {
                        match o.tag_name().name() {
                            "wavy-line" => {
                                self.track_span(open, ctx, "wavy-line", o.attribute("type"))
                            }
                            "trill-mark" | "turn" | "delayed-turn" | "inverted-turn"
                            | "shake" | "mordent" | "inverted-mordent" | "schleifer"
                            | "tremolo" | "haydn" | "other-ornament" | "accidental-mark" => {}
                            other => self
                                .errors
                                .push(format!("{ctx}: unexpected ornament <{other}>")),
                        }
                    }
                }
                "technical" => self.technical(&c, ctx, open),
                "articulations" | "dynamics" | "fermata" | "arpeggiate" | "non-arpeggiate"
                | "accidental-mark" | "tuplet" | "other-notation" | "footnote" | "level" => {}
                other => self.errors.push(format!("{ctx}: unexpected notation <{other}>")),
            }
        }
    }

    fn technical(
        &mut self,
        node: &Node,
        ctx: &str,
        open: &mut std::collections::BTreeMap<&'static str, i64>,
    ) {
        for c in node.children().filter(|c| c.is_element()) {
            match c.tag_name().name() {
                "hammer-on" => self.track_span(open, ctx, "hammer-on", c.attribute("type")),
                "pull-off" => self.track_span(open, ctx, "pull-off", c.attribute("type")),
                "bend" => {
                    let mut saw_alter = false;
                    check_order(
                        self,
                        &c,
                        &[
                            ("bend-alter", 1),
                            ("pre-bend", 2),
                            ("release", 2),
                            ("with-bar", 3),
                        ],
                        &format!("{ctx} bend"),
                    );
                    if let Some(alter) = child(&c, "bend-alter") {
                        saw_alter = true;
                        if float_text(&alter).is_none() {
                            self.errors.push(format!("{ctx}: bend-alter must be numeric"));
                        }
                    }
                    if !saw_alter {
                        self.errors.push(format!("{ctx}: bend without bend-alter"));
                    }
                }
                "string" => match int_text(&c) {
                    Some(s) if s >= 1 => {}
                    _ => self.errors.push(format!("{ctx}: string must be a positive integer")),
                },
                "fret" => match int_text(&c) {
                    Some(f) if f >= 0 => {}
                    _ => self.errors.push(format!("{ctx}: fret must be a non-negative integer")),
                },
                "fingering" => {}
                "up-bow" | "down-bow" | "harmonic" | "open-string" | "thumb-position"
                | "pluck" | "double-tongue" | "triple-tongue" | "stopped" | "snap-pizzicato"
                | "tap" | "heel" | "toe" | "fingernails" | "other-technical" => {}
                other => self.errors.push(format!("{ctx}: unexpected technical <{other}>")),
            }
        }
    }
}

fn type_denominator(name: &str) -> Option<u64> {
    Some(match name {
        "whole" => 1,
        "half" => 2,
        "quarter" => 4,
        "eighth" => 8,
        "16th" => 16,
        "32nd" => 32,
        "64th" => 64,
        "128th" => 128,
        "256th" => 256,
        _ => return None,
    })
}
