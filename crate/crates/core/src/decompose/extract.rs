//! Rule-based extraction of math entities from a question.

use super::lexicon::{Cue, Lexicon};
use super::{EntityKind, Literal, MathEntity};

#[derive(Debug, Clone, PartialEq)]
enum TokenKind {
    Word,
    Number(f64),
    Str(String),
    Date(String),
    Symbol,
    Punct,
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokenKind,
    /// Original text.
    text: String,
    /// Lower-cased text used for matching.
    key: String,
    start: usize,
    end: usize,
}

fn is_iso_date(s: &str) -> bool {
    let b = s.as_bytes();
    b.len() == 10
        && b[4] == b'-'
        && b[7] == b'-'
        && b.iter().enumerate().all(|(i, c)| i == 4 || i == 7 || c.is_ascii_digit())
}

fn tokenize(question: &str) -> Vec<Token> {
    let chars: Vec<char> = question.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let push = |out: &mut Vec<Token>, kind: TokenKind, start: usize, end: usize| {
        let text: String = chars[start..end].iter().collect();
        out.push(Token {
            kind,
            key: text.to_lowercase(),
            text,
            start,
            end,
        });
    };
    while i < chars.len() {
        let c = chars[i];
        let prev_alnum = i > 0 && chars[i - 1].is_alphanumeric();
        if c.is_whitespace() {
            i += 1;
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            push(&mut out, TokenKind::Word, start, i);
        } else if c.is_ascii_digit()
            || (c == '-' && !prev_alnum && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()))
        {
            let start = i;
            let iso: String = chars[i..(i + 10).min(chars.len())].iter().collect();
            if is_iso_date(&iso) {
                push(&mut out, TokenKind::Date(iso), i, i + 10);
                i += 10;
                continue;
            }
            i += 1;
            let mut seen_dot = false;
            while i < chars.len() {
                if chars[i].is_ascii_digit() {
                    i += 1;
                } else if chars[i] == '.' && !seen_dot && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()) {
                    seen_dot = true;
                    i += 1;
                } else {
                    break;
                }
            }
            let text: String = chars[start..i].iter().collect();
            let value = text.parse::<f64>().expect("scanned a decimal literal");
            push(&mut out, TokenKind::Number(value), start, i);
        } else if matches!(c, '\'' | '"' | '‘' | '“') && !prev_alnum {
            let close = match c {
                '‘' => '’',
                '“' => '”',
                other => other,
            };
            match chars[i + 1..].iter().position(|&ch| ch == close) {
                Some(len) => {
                    let value: String = chars[i + 1..i + 1 + len].iter().collect();
                    push(&mut out, TokenKind::Str(value), i, i + len + 2);
                    i += len + 2;
                }
                None => {
                    push(&mut out, TokenKind::Punct, i, i + 1);
                    i += 1;
                }
            }
        } else {
            let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
            if matches!(two.as_str(), ">=" | "<=" | "!=" | "<>") {
                push(&mut out, TokenKind::Symbol, i, i + 2);
                i += 2;
            } else if matches!(c, '>' | '<' | '=' | '≥' | '≤' | '≠') {
                push(&mut out, TokenKind::Symbol, i, i + 1);
                i += 1;
            } else {
                push(&mut out, TokenKind::Punct, i, i + 1);
                i += 1;
            }
        }
    }
    out
}

struct Extractor<'a> {
    lex: &'a Lexicon,
    tokens: Vec<Token>,
    used: Vec<bool>,
    entities: Vec<MathEntity>,
}

impl<'a> Extractor<'a> {
    fn key(&self, i: usize) -> Option<&str> {
        self.tokens.get(i).map(|t| t.key.as_str())
    }

    fn free(&self, i: usize) -> bool {
        i < self.tokens.len() && !self.used[i]
    }

    fn is_content(&self, i: usize) -> bool {
        self.free(i)
            && self.tokens[i].kind == TokenKind::Word
            && !self.lex.stopwords.contains(&self.tokens[i].key)
    }

    fn matches(&self, i: usize, cue: &Cue) -> bool {
        cue.words
            .iter()
            .enumerate()
            .all(|(k, w)| self.free(i + k) && self.key(i + k) == Some(w.as_str()))
    }

    fn cue_at<'c>(&self, i: usize, cues: &'c [Cue]) -> Option<&'c Cue> {
        cues.iter().find(|c| self.matches(i, c))
    }

    fn literal(&self, i: usize) -> Option<Literal> {
        if !self.free(i) {
            return None;
        }
        match &self.tokens[i].kind {
            TokenKind::Number(v) => Some(Literal::Number(*v)),
            TokenKind::Str(s) => Some(Literal::String(s.clone())),
            TokenKind::Date(d) => Some(Literal::Date(d.clone())),
            _ => None,
        }
    }

    fn phrase(&self, from: usize, to: usize) -> String {
        self.tokens[from..to]
            .iter()
            .map(|t| t.text.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Up to two content words ending just before `end`.
    fn words_before(&self, end: usize) -> Option<(usize, usize)> {
        let mut start = end;
        while start > 0 && end - start < 2 && self.is_content(start - 1) {
            start -= 1;
        }
        (start < end).then_some((start, end))
    }

    /// Attribute phrase preceding position `i`. In `X of [the] Y <cue>` the
    /// attribute is `X`.
    fn attribute_before(&self, mut i: usize, skip_copula: bool) -> Option<(usize, usize)> {
        if skip_copula && i > 0 && self.free(i - 1) && self.lex.copulas.contains(&self.tokens[i - 1].key) {
            i -= 1;
        }
        let (start, end) = self.words_before(i)?;
        let mut k = start;
        while k > 0 && self.lex.articles.contains(&self.tokens[k - 1].key) {
            k -= 1;
        }
        if k > 1 && self.tokens[k - 1].key == "of" {
            if let Some(outer) = self.words_before(k - 1) {
                return Some(outer);
            }
        }
        Some((start, end))
    }

    /// Up to two content words starting at `i`, after leading stopwords.
    fn attribute_after(&self, mut i: usize, max_skip: usize) -> Option<(usize, usize)> {
        let mut skipped = 0;
        while skipped < max_skip && self.free(i) && self.lex.stopwords.contains(&self.tokens[i].key) {
            i += 1;
            skipped += 1;
        }
        let start = i;
        while i < self.tokens.len() && i - start < 2 && self.is_content(i) {
            i += 1;
        }
        (start < i).then_some((start, i))
    }

    fn mark(&mut self, from: usize, to: usize) {
        for u in &mut self.used[from..to] {
            *u = true;
        }
    }

    fn push(&mut self, kind: EntityKind, operation: &str, targets: Vec<String>, literals: Vec<Literal>, from: usize, to: usize) {
        self.entities.push(MathEntity {
            kind,
            operation: operation.to_string(),
            target_attributes: targets,
            literals,
            source_span: [self.tokens[from].start, self.tokens[to - 1].end],
        });
        self.mark(from, to);
    }

    /// A date at `i`: an ISO token, or `<month> <day> [,] [year]`. Returns
    /// `(year, month, day, next)`.
    fn date_at(&self, i: usize) -> Option<(Option<u32>, u32, u32, usize)> {
        if let Some(TokenKind::Date(d)) = self.tokens.get(i).map(|t| &t.kind) {
            let year = d[0..4].parse().ok();
            return Some((year, d[5..7].parse().ok()?, d[8..10].parse().ok()?, i + 1));
        }
        let month = self.lex.month(self.key(i)?)?;
        let day = match self.tokens.get(i + 1)?.kind {
            TokenKind::Number(v) if v.fract() == 0.0 && (1.0..=31.0).contains(&v) => v as u32,
            _ => return None,
        };
        let mut next = i + 2;
        if self.key(next) == Some(",") {
            if let Some(y) = self.year_at(next + 1) {
                return Some((Some(y), month, day, next + 2));
            }
        }
        if let Some(y) = self.year_at(next) {
            next += 1;
            return Some((Some(y), month, day, next));
        }
        Some((None, month, day, next))
    }

    fn year_at(&self, i: usize) -> Option<u32> {
        match self.tokens.get(i)?.kind {
            TokenKind::Number(v) if v.fract() == 0.0 && (1000.0..=9999.0).contains(&v) => Some(v as u32),
            _ => None,
        }
    }

    /// `between <date> and <date> [of|,] [year]` and `between <n> and <m>`.
    fn ranges(&mut self) {
        let mut i = 0;
        while i < self.tokens.len() {
            if !(self.free(i) && self.key(i) == Some("between")) {
                i += 1;
                continue;
            }
            let attr = self.attribute_before(i, true);
            let from = attr.map_or(i, |a| a.0);
            if let Some((y1, m1, d1, next)) = self.date_at(i + 1) {
                if self.key(next) == Some("and") {
                    if let Some((y2, m2, d2, mut end)) = self.date_at(next + 1) {
                        let mut shared = None;
                        if matches!(self.key(end), Some("of") | Some(",")) {
                            if let Some(y) = self.year_at(end + 1) {
                                shared = Some(y);
                                end += 2;
                            }
                        }
                        let y2 = y2.or(shared);
                        let y1 = y1.or(y2);
                        if let (Some(y1), Some(y2)) = (y1, y2) {
                            let target = attr.map_or_else(|| "date".to_string(), |(s, e)| self.phrase(s, e));
                            let lits = vec![
                                Literal::Date(format!("{y1:04}-{m1:02}-{d1:02}")),
                                Literal::Date(format!("{y2:04}-{m2:02}-{d2:02}")),
                            ];
                            self.push(EntityKind::Temporal, "BETWEEN", vec![target], lits, from, end);
                            i = end;
                            continue;
                        }
                    }
                }
            }
            if let (Some(lo), Some("and"), Some(hi)) = (self.literal(i + 1), self.key(i + 2), self.literal(i + 3)) {
                let (targets, from, to) = match attr {
                    Some((s, e)) => (vec![self.phrase(s, e)], s, i + 4),
                    None => match self.attribute_after(i + 4, 0) {
                        Some((s, e)) => (vec![self.phrase(s, e)], i, e),
                        None => (Vec::new(), i, i + 4),
                    },
                };
                self.push(EntityKind::Range, "BETWEEN", targets, vec![lo, hi], from, to);
                i = to;
                continue;
            }
            i += 1;
        }
    }

    /// `before|after|since|until <date or year>`.
    fn temporal(&mut self) {
        let cues = self.lex.temporal.clone();
        for i in 0..self.tokens.len() {
            let Some(cue) = self.cue_at(i, &cues) else { continue };
            let at = i + cue.words.len();
            let (literal, end) = if let Some((y, m, d, end)) = self.date_at(at).filter(|x| x.0.is_some()) {
                (format!("{:04}-{m:02}-{d:02}", y.unwrap()), end)
            } else if let Some(y) = self.year_at(at).filter(|_| self.free(at)) {
                (format!("{y:04}"), at + 1)
            } else {
                continue;
            };
            if !(at..end).all(|k| self.free(k)) {
                continue;
            }
            let attr = self.attribute_before(i, true);
            let target = attr.map_or_else(|| "date".to_string(), |(s, e)| self.phrase(s, e));
            let from = attr.map_or(i, |a| a.0);
            let op = cue.operation.clone();
            self.push(EntityKind::Temporal, &op, vec![target], vec![Literal::Date(literal)], from, end);
        }
    }

    /// `<attr> [is] [not] null`.
    fn null_checks(&mut self) {
        for i in 0..self.tokens.len() {
            if !(self.free(i) && self.key(i) == Some("null")) {
                continue;
            }
            let mut j = i;
            let mut op = "IS NULL";
            if j > 0 && self.free(j - 1) && self.key(j - 1) == Some("not") {
                op = "IS NOT NULL";
                j -= 1;
            }
            let Some((s, e)) = self.attribute_before(j, true) else { continue };
            let target = self.phrase(s, e);
            self.push(EntityKind::Comparison, op, vec![target], vec![Literal::Null], s, i + 1);
        }
    }

    /// `<attr> <comparator> <literal>`, or `<comparator> <literal> <attr>`.
    fn comparisons(&mut self) {
        let cues = self.lex.comparators.clone();
        for i in 0..self.tokens.len() {
            let Some(cue) = self.cue_at(i, &cues) else { continue };
            let at = i + cue.words.len();
            let Some(lit) = self.literal(at) else { continue };
            let is_copula = cue.words.len() == 1 && self.lex.copulas.contains(&cue.words[0]);
            let (targets, from, to) = match self.attribute_before(i, !is_copula) {
                Some((s, e)) => (vec![self.phrase(s, e)], s, at + 1),
                None => match self.attribute_after(at + 1, 0) {
                    Some((s, e)) => (vec![self.phrase(s, e)], i, e),
                    None => (Vec::new(), i, at + 1),
                },
            };
            let op = cue.operation.clone();
            self.push(EntityKind::Comparison, &op, targets, vec![lit], from, to);
        }
    }

    /// `<aggregate> [of the] <attr> [per <attr>]`.
    fn aggregations(&mut self) {
        let cues = self.lex.aggregations.clone();
        for i in 0..self.tokens.len() {
            let Some(cue) = self.cue_at(i, &cues) else { continue };
            let at = i + cue.words.len();
            let mut targets = Vec::new();
            let mut end = at;
            if let Some((s, e)) = self.attribute_after(at, 2) {
                targets.push(self.phrase(s, e));
                end = e;
                if self.free(e) && self.key(e) == Some("per") {
                    if let Some((s2, e2)) = self.attribute_after(e + 1, 1) {
                        targets.push(self.phrase(s2, e2));
                        end = e2;
                    }
                }
            }
            let op = cue.operation.clone();
            self.push(EntityKind::Aggregation, &op, targets, Vec::new(), i, end);
        }
    }

    /// Grouping cues and `by <time unit>`.
    fn groupings(&mut self) {
        let cues = self.lex.grouping.clone();
        for i in 0..self.tokens.len() {
            if let Some(cue) = self.cue_at(i, &cues) {
                let at = i + cue.words.len();
                if let Some((s, e)) = self.attribute_after(at, 1) {
                    let target = self.phrase(s, e);
                    self.push(EntityKind::Grouping, "GROUP BY", vec![target], Vec::new(), i, e);
                }
                continue;
            }
            if self.free(i) && self.key(i) == Some("by") && self.free(i + 1) {
                let unit = &self.tokens.get(i + 1).map(|t| t.key.clone()).unwrap_or_default();
                if self.lex.time_units.contains(unit) {
                    let target = self.tokens[i + 1].text.clone();
                    self.push(EntityKind::Grouping, "GROUP BY", vec![target], Vec::new(), i, i + 2);
                }
            }
        }
    }

    /// `calculate the <attr>`, `ratio of <attr> to <attr>` and similar.
    fn arithmetic(&mut self) {
        let cues = self.lex.arithmetic.clone();
        for i in 0..self.tokens.len() {
            let Some(cue) = self.cue_at(i, &cues) else { continue };
            let at = i + cue.words.len();
            let mut targets = Vec::new();
            let mut end = at;
            if let Some((s, e)) = self.attribute_after(at, 3) {
                targets.push(self.phrase(s, e));
                end = e;
                if matches!(self.key(e), Some("to" | "and" | "versus" | "vs")) && self.free(e) {
                    if let Some((s2, e2)) = self.attribute_after(e + 1, 1) {
                        targets.push(self.phrase(s2, e2));
                        end = e2;
                    }
                }
            }
            let op = cue.operation.clone();
            self.push(EntityKind::Arithmetic, &op, targets, Vec::new(), i, end);
        }
    }
}

/// Deterministic keyword and pattern pass over `question`. Entities come
/// back ordered by their position in the question.
pub fn extract_entities(question: &str, lexicon: &Lexicon) -> Vec<MathEntity> {
    let tokens = tokenize(question);
    let mut ex = Extractor {
        lex: lexicon,
        used: vec![false; tokens.len()],
        tokens,
        entities: Vec::new(),
    };
    ex.ranges();
    ex.temporal();
    ex.null_checks();
    ex.comparisons();
    ex.aggregations();
    ex.groupings();
    ex.arithmetic();
    let mut entities = ex.entities;
    entities.sort_by_key(|e| e.source_span);
    entities
}

#[cfg(test)]
mod tests {
    use super::*;

    fn extract(q: &str) -> Vec<MathEntity> {
        extract_entities(q, &Lexicon::builtin())
    }

    fn summary(es: &[MathEntity]) -> Vec<(EntityKind, String, Vec<String>)> {
        es.iter()
            .map(|e| (e.kind, e.operation.clone(), e.target_attributes.clone()))
            .collect()
    }

    #[test]
    fn tokenizer_handles_literals() {
        let t = tokenize("x >= -10°C and d = 2017-04-01 and s = 'shut down' don't 3.5.");
        let kinds: Vec<&TokenKind> = t.iter().map(|t| &t.kind).collect();
        assert!(kinds.contains(&&TokenKind::Number(-10.0)));
        assert!(kinds.contains(&&TokenKind::Date("2017-04-01".into())));
        assert!(kinds.contains(&&TokenKind::Str("shut down".into())));
        assert!(kinds.contains(&&TokenKind::Number(3.5)));
        assert_eq!(t[1].text, ">=");
    }

    #[test]
    fn plain_listing_has_no_entities() {
        assert!(extract("list all customers").is_empty());
    }

    #[test]
    fn comparison_and_null_check() {
        let es = extract("transactions >= 1 and productRevenue not null");
        assert_eq!(
            summary(&es),
            [
                (EntityKind::Comparison, ">=".into(), vec!["transactions".into()]),
                (EntityKind::Comparison, "IS NOT NULL".into(), vec!["productRevenue".into()]),
            ]
        );
        assert_eq!(es[0].literals, [Literal::Number(1.0)]);
        assert_eq!(es[1].literals, [Literal::Null]);
        assert_eq!(es[0].source_span, [0, 17]);
    }

    #[test]
    fn average_per_visitor_with_groupings() {
        let es = extract("compare the average pageviews per visitor for each group by month");
        assert_eq!(
            summary(&es),
            [
                (EntityKind::Aggregation, "AVG".into(), vec!["pageviews".into(), "visitor".into()]),
                (EntityKind::Grouping, "GROUP BY".into(), vec!["group".into()]),
                (EntityKind::Grouping, "GROUP BY".into(), vec!["month".into()]),
            ]
        );
    }

    #[test]
    fn date_range_with_shared_year() {
        let es = extract("Between April 1 and July 31 of 2017, count sessions");
        assert_eq!(es[0].kind, EntityKind::Temporal);
        assert_eq!(es[0].operation, "BETWEEN");
        assert_eq!(es[0].target_attributes, ["date"]);
        assert_eq!(
            es[0].literals,
            [Literal::Date("2017-04-01".into()), Literal::Date("2017-07-31".into())]
        );
        assert_eq!(es[1].operation, "COUNT");
        assert_eq!(es[1].target_attributes, ["sessions"]);
    }

    #[test]
    fn numeric_range_and_verbal_comparators() {
        let es = extract("orders with price between 10 and 20 and quantity at least 3");
        assert_eq!(
            summary(&es),
            [
                (EntityKind::Range, "BETWEEN".into(), vec!["price".into()]),
                (EntityKind::Comparison, ">=".into(), vec!["quantity".into()]),
            ]
        );
        let es = extract("customers with more than 5 orders");
        assert_eq!(es[0].operation, ">");
        assert_eq!(es[0].target_attributes, ["orders"]);
    }

    #[test]
    fn collector_question() {
        let q = "If the status of a data collector shows 'shutdown' and its installation altitude is 3000 meters, \
                 assuming the last data collection record before shutdown indicates a temperature of -10°C, \
                 please calculate the atmospheric pressure value at that location and analyze possible reasons for the shutdown.";
        let es = extract(q);
        assert_eq!(
            summary(&es),
            [
                (EntityKind::Comparison, "=".into(), vec!["status".into()]),
                (EntityKind::Comparison, "=".into(), vec!["installation altitude".into()]),
                (EntityKind::Comparison, "=".into(), vec!["temperature".into()]),
                (EntityKind::Arithmetic, "COMPUTE".into(), vec!["atmospheric pressure".into()]),
            ]
        );
        assert_eq!(es[0].literals, [Literal::String("shutdown".into())]);
        assert_eq!(es[1].literals, [Literal::Number(3000.0)]);
        assert_eq!(es[2].literals, [Literal::Number(-10.0)]);
    }

    #[test]
    fn temporal_cues_need_a_date() {
        let es = extract("orders placed after 2019 and before shutdown");
        assert_eq!(es.len(), 1);
        assert_eq!(es[0].operation, ">");
        assert_eq!(es[0].literals, [Literal::Date("2019".into())]);
    }

    #[test]
    fn extraction_is_deterministic() {
        let q = "total revenue per region grouped by year where margin < 0.3";
        assert_eq!(extract(q), extract(q));
    }
}
