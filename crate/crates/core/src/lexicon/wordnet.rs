//! Reader for the classic lexical-database noun files (`data.noun`, `index.noun`).
//!
//! Only hypernym pointers (`@` and instance `@i`) are kept; hyponym edges are
//! derived from them so both directions always agree.

use std::fs;
use std::path::Path;

use super::graph::{GraphBuilder, LexicalGraph};
use super::LexiconError;

pub(crate) fn load_noun_db(dir: &Path) -> Result<LexicalGraph, LexiconError> {
    let data_path = dir.join("data.noun");
    let data = fs::read_to_string(&data_path).map_err(|e| LexiconError::io(&data_path, e))?;
    let mut builder = GraphBuilder::default();
    parse_data(&data, &mut builder)?;

    let index_path = dir.join("index.noun");
    if index_path.exists() {
        let index = fs::read_to_string(&index_path).map_err(|e| LexiconError::io(&index_path, e))?;
        parse_index(&index, &mut builder)?;
    }
    builder.build()
}

fn is_license_line(line: &str) -> bool {
    line.starts_with("  ") || line.trim().is_empty()
}

fn malformed(line: usize, message: impl Into<String>) -> LexiconError {
    LexiconError::Malformed {
        line,
        message: message.into(),
    }
}

pub(crate) fn parse_data(text: &str, builder: &mut GraphBuilder) -> Result<(), LexiconError> {
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if is_license_line(line) {
            continue;
        }
        let body = line.split(" | ").next().unwrap_or(line);
        let mut tokens = body.split_whitespace();
        let mut next = |what: &str| {
            tokens
                .next()
                .ok_or_else(|| malformed(lineno, format!("missing {what}")))
        };
        let offset = next("synset offset")?;
        let _lex_filenum = next("lex_filenum")?;
        let ss_type = next("ss_type")?;
        if ss_type != "n" {
            return Err(malformed(lineno, format!("expected noun synset, found `{ss_type}`")));
        }
        let w_cnt = usize::from_str_radix(next("w_cnt")?, 16)
            .map_err(|_| malformed(lineno, "w_cnt is not hexadecimal"))?;
        builder.add_synset(offset, lineno)?;
        for _ in 0..w_cnt {
            let word = next("word")?;
            let _lex_id = next("lex_id")?;
            builder.add_lemma(word, offset);
        }
        let p_cnt: usize = next("p_cnt")?
            .parse()
            .map_err(|_| malformed(lineno, "p_cnt is not a number"))?;
        for _ in 0..p_cnt {
            let symbol = next("pointer symbol")?;
            let target = next("pointer offset")?;
            let pos = next("pointer pos")?;
            let _source_target = next("pointer source/target")?;
            if (symbol == "@" || symbol == "@i") && pos == "n" {
                builder.add_hypernym(offset, target, lineno);
            }
        }
    }
    Ok(())
}

pub(crate) fn parse_index(text: &str, builder: &mut GraphBuilder) -> Result<(), LexiconError> {
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if is_license_line(line) {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() < 4 {
            return Err(malformed(lineno, "index line too short"));
        }
        let lemma = tokens[0];
        let synset_cnt: usize = tokens[2]
            .parse()
            .map_err(|_| malformed(lineno, "synset_cnt is not a number"))?;
        let p_cnt: usize = tokens[3]
            .parse()
            .map_err(|_| malformed(lineno, "p_cnt is not a number"))?;
        // lemma pos synset_cnt p_cnt [ptr]*p_cnt sense_cnt tagsense_cnt offset*synset_cnt
        let first = 4 + p_cnt + 2;
        let offsets = tokens
            .get(first..first + synset_cnt)
            .ok_or_else(|| malformed(lineno, "fewer synset offsets than synset_cnt"))?;
        for offset in offsets {
            builder.add_lemma(lemma, offset);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const DATA: &str = "  1 This software and database is being provided under a license\n\
        00000001 03 n 01 entity 0 000 | that which exists\n\
        00000002 05 n 02 canine 0 canid 0 001 @ 00000001 n 0000 | a mammal\n\
        00000003 05 n 02 dog 0 domestic_dog 0 002 @ 00000002 n 0000 ~ 00000004 n 0000 | a dog\n\
        00000004 05 n 01 puppy 0 001 @ 00000003 n 0000 | a young dog\n";

    #[test]
    fn parses_data_lines() {
        let mut b = GraphBuilder::default();
        parse_data(DATA, &mut b).unwrap();
        let g = b.build().unwrap();
        assert_eq!(g.synset_total(), 4);
        assert_eq!(g.edge_total(), 3);
        assert_eq!(g.shortest_path_length("puppy", "canid"), Some(2));
        assert_eq!(g.hypernym_count("domestic dog"), 2);
    }

    #[test]
    fn index_must_reference_known_offsets() {
        let mut b = GraphBuilder::default();
        parse_data(DATA, &mut b).unwrap();
        parse_index("hound n 1 0 1 0 00000099\n", &mut b).unwrap();
        assert!(matches!(b.build(), Err(LexiconError::Integrity(_))));
    }

    #[test]
    fn truncated_pointer_list_is_malformed() {
        let mut b = GraphBuilder::default();
        let err = parse_data("00000001 03 n 01 entity 0 002 @ 00000002 n 0000\n", &mut b).unwrap_err();
        assert!(matches!(err, LexiconError::Malformed { line: 1, .. }), "{err}");
    }
}
