//! Route clause grammar.
//!
//! ```text
//! TURN := "turn" (90|180) "degrees" (left|right)
//! MOVE := MOVE_VERB [adverb] [<number> "meters"] ["to" ["the"] NP]
//! ```
//!
//! Steps are split on sentence punctuation, commas and the word "and".
//! Fragments that do not start with a movement verb are ordinary actions
//! and are kept as [`Fragment::Action`].

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TurnDirection {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MoveVerb {
    Walk,
    Move,
    Go,
    Head,
    Proceed,
}

impl MoveVerb {
    pub fn parse(word: &str) -> Option<Self> {
        Some(match word {
            "walk" => MoveVerb::Walk,
            "move" => MoveVerb::Move,
            "go" => MoveVerb::Go,
            "head" => MoveVerb::Head,
            "proceed" => MoveVerb::Proceed,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MoveVerb::Walk => "walk",
            MoveVerb::Move => "move",
            MoveVerb::Go => "go",
            MoveVerb::Head => "head",
            MoveVerb::Proceed => "proceed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "clause", rename_all = "lowercase")]
pub enum RouteClause {
    Turn {
        degrees: u16,
        direction: TurnDirection,
    },
    Move {
        verb: MoveVerb,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        adverb: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        distance_m: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        target: Option<String>,
    },
}

impl RouteClause {
    pub fn turn(degrees: u16, direction: TurnDirection) -> Self {
        RouteClause::Turn { degrees, direction }
    }

    /// The leading verb, as it would be written.
    pub fn verb_str(&self) -> &'static str {
        match self {
            RouteClause::Turn { .. } => "turn",
            RouteClause::Move { verb, .. } => verb.as_str(),
        }
    }

    pub fn target(&self) -> Option<&str> {
        match self {
            RouteClause::Move { target, .. } => target.as_deref(),
            RouteClause::Turn { .. } => None,
        }
    }
}

impl fmt::Display for RouteClause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RouteClause::Turn { degrees, direction } => {
                let dir = match direction {
                    TurnDirection::Left => "left",
                    TurnDirection::Right => "right",
                };
                write!(f, "turn {degrees} degrees {dir}")
            }
            RouteClause::Move {
                verb,
                adverb,
                distance_m,
                target,
            } => {
                write!(f, "{}", verb.as_str())?;
                if let Some(a) = adverb {
                    write!(f, " {a}")?;
                }
                if let Some(d) = distance_m {
                    let unit = if *d == 1.0 { "meter" } else { "meters" };
                    write!(f, " {d} {unit}")?;
                }
                if let Some(t) = target {
                    write!(f, " to the {t}")?;
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Fragment {
    Clause(RouteClause),
    /// Starts with a movement verb but does not fit the grammar.
    Unparsed(String),
    /// Anything else, e.g. "pick up the water kettle".
    Action(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RouteGrammar {
    /// Adverb phrases, matched longest first.
    pub adverbs: Vec<String>,
}

impl Default for RouteGrammar {
    fn default() -> Self {
        RouteGrammar {
            adverbs: ["straight ahead", "forward", "back", "around"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
        }
    }
}

const LEADING_FILLERS: &[&str] = &["then", "and", "first", "next", "finally", "now"];
const DETERMINERS: &[&str] = &["the", "a", "an"];

/// Splits on `.!?;,` (a period between digits is kept) and on the word "and".
pub fn split_fragments(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut sentences = Vec::new();
    let mut cur = String::new();
    for (i, &c) in chars.iter().enumerate() {
        let decimal_point =
            c == '.' && i > 0 && chars[i - 1].is_ascii_digit() && chars.get(i + 1).is_some_and(|n| n.is_ascii_digit());
        if matches!(c, '.' | '!' | '?' | ';' | ',') && !decimal_point {
            sentences.push(std::mem::take(&mut cur));
        } else {
            cur.push(c);
        }
    }
    sentences.push(cur);

    let mut out = Vec::new();
    for sentence in sentences {
        let mut part: Vec<&str> = Vec::new();
        for word in sentence.split_whitespace() {
            if word.eq_ignore_ascii_case("and") {
                if !part.is_empty() {
                    out.push(part.join(" "));
                }
                part.clear();
            } else {
                part.push(word);
            }
        }
        if !part.is_empty() {
            out.push(part.join(" "));
        }
    }
    out
}

/// Lowercase tokens; keeps decimal numbers such as `2.5` whole.
fn tokens(fragment: &str) -> Vec<String> {
    fragment
        .to_lowercase()
        .split(|c: char| !(c.is_alphanumeric() || c == '.'))
        .map(|w| w.trim_matches('.'))
        .filter(|w| !w.is_empty())
        .map(str::to_string)
        .collect()
}

fn is_number(tok: &str) -> bool {
    tok.parse::<f64>().is_ok_and(|v| v.is_finite() && v >= 0.0)
}

impl RouteGrammar {
    pub fn parse_fragments(&self, step_text: &str) -> Vec<Fragment> {
        split_fragments(step_text)
            .into_iter()
            .filter_map(|frag| self.parse_fragment(&frag))
            .collect()
    }

    pub fn parse_route(&self, step_text: &str) -> Vec<RouteClause> {
        self.parse_fragments(step_text)
            .into_iter()
            .filter_map(|f| match f {
                Fragment::Clause(c) => Some(c),
                _ => None,
            })
            .collect()
    }

    fn parse_fragment(&self, fragment: &str) -> Option<Fragment> {
        let mut toks = tokens(fragment);
        // "Step 2: ..." labels
        if toks.len() >= 2 && toks[0] == "step" && toks[1].chars().all(|c| c.is_ascii_digit()) {
            toks.drain(..2);
        }
        while toks.first().is_some_and(|t| LEADING_FILLERS.contains(&t.as_str())) {
            toks.remove(0);
        }
        let first = toks.first()?.clone();
        let unparsed = || Some(Fragment::Unparsed(fragment.trim().to_string()));

        if first == "turn" {
            if toks.get(1).is_some_and(|t| t == "on" || t == "off") {
                return Some(Fragment::Action(fragment.trim().to_string()));
            }
            let degrees = match toks.get(1).map(String::as_str) {
                Some("90") => 90,
                Some("180") => 180,
                _ => return unparsed(),
            };
            if !toks.get(2).is_some_and(|t| t == "degrees" || t == "degree") {
                return unparsed();
            }
            let direction = match toks.get(3).map(String::as_str) {
                Some("left") => TurnDirection::Left,
                Some("right") => TurnDirection::Right,
                _ => return unparsed(),
            };
            return Some(Fragment::Clause(RouteClause::Turn { degrees, direction }));
        }

        let Some(verb) = MoveVerb::parse(&first) else {
            return Some(Fragment::Action(fragment.trim().to_string()));
        };
        let mut i = 1;
        let adverb = self.match_adverb(&toks[i..]).map(|(adv, len)| {
            i += len;
            adv
        });
        let mut distance_m = None;
        if i + 1 < toks.len() && is_number(&toks[i]) && matches!(toks[i + 1].as_str(), "meters" | "meter" | "m") {
            distance_m = toks[i].parse::<f64>().ok();
            i += 2;
        }
        if toks.get(i).is_some_and(|t| t == "over") {
            i += 1;
        }
        let mut target = None;
        if toks
            .get(i)
            .is_some_and(|t| matches!(t.as_str(), "to" | "toward" | "towards"))
        {
            i += 1;
            while toks.get(i).is_some_and(|t| DETERMINERS.contains(&t.as_str())) {
                i += 1;
            }
            if i >= toks.len() {
                return unparsed();
            }
            target = Some(toks[i..].join(" "));
        } else if adverb.is_none() && distance_m.is_none() {
            if verb == MoveVerb::Move && toks.get(1).is_some_and(|t| DETERMINERS.contains(&t.as_str())) {
                // "move the chair" manipulates an object
                return Some(Fragment::Action(fragment.trim().to_string()));
            }
            return unparsed();
        }
        Some(Fragment::Clause(RouteClause::Move {
            verb,
            adverb,
            distance_m,
            target,
        }))
    }

    fn match_adverb(&self, toks: &[String]) -> Option<(String, usize)> {
        let mut lexicon: Vec<(Vec<&str>, &String)> = self
            .adverbs
            .iter()
            .map(|a| (a.split_whitespace().collect(), a))
            .collect();
        lexicon.sort_by_key(|entry| std::cmp::Reverse(entry.0.len()));
        lexicon.into_iter().find_map(|(words, adv)| {
            let hit = !words.is_empty()
                && words.len() <= toks.len()
                && words.iter().zip(toks).all(|(w, t)| w.eq_ignore_ascii_case(t));
            hit.then(|| (adv.to_lowercase(), words.len()))
        })
    }
}

/// Parses with the default grammar.
pub fn parse_route(step_text: &str) -> Vec<RouteClause> {
    RouteGrammar::default().parse_route(step_text)
}

pub fn parse_fragments(step_text: &str) -> Vec<Fragment> {
    RouteGrammar::default().parse_fragments(step_text)
}
