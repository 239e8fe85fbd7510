//! Hypernym/hyponym graph over noun synsets.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fs;
use std::path::Path;

use super::{wordnet, LexiconError};

/// Source format accepted by [`LexicalGraph::load`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GraphFormat {
    /// Directory holding the classic `data.noun` (and optionally `index.noun`) files.
    StandardDb,
    /// `synset_id<TAB>lemma,lemma<TAB>hypernym,hypernym`
    FixtureTsv,
}

/// Immutable noun taxonomy. Synsets are stored densely; ids are kept for reporting.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LexicalGraph {
    ids: Vec<String>,
    by_id: HashMap<String, usize>,
    hypernyms: Vec<Vec<usize>>,
    hyponyms: Vec<Vec<usize>>,
    lemmas: HashMap<String, Vec<usize>>,
}

/// Accumulates synsets and edges before integrity checks run.
#[derive(Debug, Default)]
pub(crate) struct GraphBuilder {
    ids: Vec<String>,
    by_id: HashMap<String, usize>,
    lemmas: Vec<(String, String)>,
    edges: Vec<(String, String, usize)>,
}

impl GraphBuilder {
    pub(crate) fn add_synset(&mut self, id: &str, line: usize) -> Result<(), LexiconError> {
        if self.by_id.contains_key(id) {
            return Err(LexiconError::Malformed {
                line,
                message: format!("duplicate synset id `{id}`"),
            });
        }
        self.by_id.insert(id.to_string(), self.ids.len());
        self.ids.push(id.to_string());
        Ok(())
    }

    pub(crate) fn add_lemma(&mut self, lemma: &str, synset: &str) {
        let lemma = normalize_lemma(lemma);
        if !lemma.is_empty() {
            self.lemmas.push((lemma, synset.to_string()));
        }
    }

    /// Records `child` IS-A `parent`; `line` is kept for error reporting.
    pub(crate) fn add_hypernym(&mut self, child: &str, parent: &str, line: usize) {
        self.edges.push((child.to_string(), parent.to_string(), line));
    }

    pub(crate) fn build(self) -> Result<LexicalGraph, LexiconError> {
        let n = self.ids.len();
        let mut hypernyms = vec![Vec::new(); n];
        let mut hyponyms = vec![Vec::new(); n];
        for (child, parent, line) in &self.edges {
            let resolve = |id: &str| {
                self.by_id.get(id).copied().ok_or_else(|| LexiconError::Integrity(format!(
                    "line {line}: edge references undeclared synset `{id}`"
                )))
            };
            let c = resolve(child)?;
            let p = resolve(parent)?;
            if !hypernyms[c].contains(&p) {
                hypernyms[c].push(p);
                hyponyms[p].push(c);
            }
        }
        let mut lemmas: HashMap<String, Vec<usize>> = HashMap::new();
        for (lemma, synset) in &self.lemmas {
            let idx = self.by_id.get(synset).copied().ok_or_else(|| {
                LexiconError::Integrity(format!("lemma `{lemma}` indexed to unknown synset `{synset}`"))
            })?;
            let entry = lemmas.entry(lemma.clone()).or_default();
            if !entry.contains(&idx) {
                entry.push(idx);
            }
        }
        let graph = LexicalGraph {
            ids: self.ids,
            by_id: self.by_id,
            hypernyms,
            hyponyms,
            lemmas,
        };
        if let Some(id) = graph.find_cycle() {
            return Err(LexiconError::Integrity(format!(
                "hypernym cycle through synset `{id}`"
            )));
        }
        Ok(graph)
    }
}

pub(crate) fn normalize_lemma(lemma: &str) -> String {
    lemma.trim().replace('_', " ").to_lowercase()
}

impl LexicalGraph {
    pub fn load(source: &Path, format: GraphFormat) -> Result<Self, LexiconError> {
        match format {
            GraphFormat::FixtureTsv => {
                let text = fs::read_to_string(source).map_err(|e| LexiconError::io(source, e))?;
                Self::from_fixture_tsv(&text)
            }
            GraphFormat::StandardDb => wordnet::load_noun_db(source),
        }
    }

    /// Parses the fixture TSV layout. `#` starts a comment line.
    pub fn from_fixture_tsv(text: &str) -> Result<Self, LexiconError> {
        let mut builder = GraphBuilder::default();
        let mut pending = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let trimmed = raw.trim_end_matches('\r');
            if trimmed.trim().is_empty() || trimmed.trim_start().starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = trimmed.split('\t').collect();
            if fields.len() < 2 || fields.len() > 3 {
                return Err(LexiconError::Malformed {
                    line,
                    message: format!("expected 2 or 3 tab-separated fields, found {}", fields.len()),
                });
            }
            let id = fields[0].trim();
            if id.is_empty() {
                return Err(LexiconError::Malformed {
                    line,
                    message: "empty synset id".into(),
                });
            }
            builder.add_synset(id, line)?;
            for lemma in fields[1].split(',').filter(|l| !l.trim().is_empty()) {
                builder.add_lemma(lemma, id);
            }
            if let Some(parents) = fields.get(2) {
                for parent in parents.split(',').map(str::trim).filter(|p| !p.is_empty()) {
                    pending.push((id.to_string(), parent.to_string(), line));
                }
            }
        }
        for (child, parent, line) in pending {
            builder.add_hypernym(&child, &parent, line);
        }
        builder.build()
    }

    pub fn synset_total(&self) -> usize {
        self.ids.len()
    }

    pub fn edge_total(&self) -> usize {
        self.hypernyms.iter().map(Vec::len).sum()
    }

    pub fn contains(&self, lemma: &str) -> bool {
        self.lemmas.contains_key(&normalize_lemma(lemma))
    }

    /// Synset ids for a lemma, in index order.
    pub fn synsets_of(&self, lemma: &str) -> Vec<&str> {
        self.lookup(lemma)
            .iter()
            .map(|&i| self.ids[i].as_str())
            .collect()
    }

    /// Every indexed lemma, sorted.
    pub fn lemmas(&self) -> Vec<&str> {
        let mut out: Vec<&str> = self.lemmas.keys().map(String::as_str).collect();
        out.sort_unstable();
        out
    }

    fn lookup(&self, lemma: &str) -> &[usize] {
        self.lemmas
            .get(&normalize_lemma(lemma))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Fewest undirected hypernym/hyponym hops between any synset of `a` and any synset of `b`.
    pub fn shortest_path_length(&self, a: &str, b: &str) -> Option<u32> {
        let sources = self.lookup(a);
        let targets: HashSet<usize> = self.lookup(b).iter().copied().collect();
        if sources.is_empty() || targets.is_empty() {
            return None;
        }
        let mut dist = vec![u32::MAX; self.ids.len()];
        let mut queue = VecDeque::new();
        for &s in sources {
            if dist[s] == u32::MAX {
                dist[s] = 0;
                queue.push_back(s);
            }
        }
        while let Some(node) = queue.pop_front() {
            if targets.contains(&node) {
                return Some(dist[node]);
            }
            let next = dist[node] + 1;
            for &nb in self.hypernyms[node].iter().chain(&self.hyponyms[node]) {
                if dist[nb] == u32::MAX {
                    dist[nb] = next;
                    queue.push_back(nb);
                }
            }
        }
        None
    }

    pub fn synset_count(&self, lemma: &str) -> usize {
        self.lookup(lemma).len()
    }

    /// Size of the ancestor closure over all senses of `lemma`.
    pub fn hypernym_count(&self, lemma: &str) -> usize {
        self.closure(self.lookup(lemma), &self.hypernyms)
    }

    /// Size of the descendant closure over all senses of `lemma`.
    pub fn hyponym_count(&self, lemma: &str) -> usize {
        self.closure(self.lookup(lemma), &self.hyponyms)
    }

    fn closure(&self, start: &[usize], edges: &[Vec<usize>]) -> usize {
        let mut seen = HashSet::new();
        let mut stack: Vec<usize> = start.iter().flat_map(|&s| edges[s].iter().copied()).collect();
        while let Some(node) = stack.pop() {
            if seen.insert(node) {
                stack.extend(edges[node].iter().copied());
            }
        }
        seen.len()
    }

    fn find_cycle(&self) -> Option<&str> {
        // Kahn's algorithm: anything left with a positive in-degree sits on a cycle.
        let n = self.ids.len();
        let mut indegree: Vec<usize> = self.hyponyms.iter().map(Vec::len).collect();
        let mut ready: Vec<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
        let mut visited = 0;
        while let Some(node) = ready.pop() {
            visited += 1;
            for &parent in &self.hypernyms[node] {
                indegree[parent] -= 1;
                if indegree[parent] == 0 {
                    ready.push(parent);
                }
            }
        }
        if visited == n {
            None
        } else {
            (0..n).find(|&i| indegree[i] > 0).map(|i| self.ids[i].as_str())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ANIMALS: &str = "# tiny taxonomy\n\
        carnivore\tcarnivore\t\n\
        canine\tcanine,canid\tcarnivore\n\
        feline\tfeline,felid\tcarnivore\n\
        dog\tdog,Domestic_Dog\tcanine\n\
        cat\tcat\tfeline\n";

    fn animals() -> LexicalGraph {
        LexicalGraph::from_fixture_tsv(ANIMALS).unwrap()
    }

    #[test]
    fn counts_synsets_and_edges() {
        let g = animals();
        assert_eq!(g.synset_total(), 5);
        assert_eq!(g.edge_total(), 4);
    }

    #[test]
    fn empty_input_gives_empty_graph() {
        let g = LexicalGraph::from_fixture_tsv("").unwrap();
        assert_eq!(g.synset_total(), 0);
        assert_eq!(g.shortest_path_length("dog", "dog"), None);
    }

    #[test]
    fn undeclared_parent_is_integrity_error() {
        let err = LexicalGraph::from_fixture_tsv("dog\tdog\tcanine\n").unwrap_err();
        assert!(matches!(err, LexiconError::Integrity(_)), "{err}");
    }

    #[test]
    fn cycle_is_integrity_error() {
        let err = LexicalGraph::from_fixture_tsv("a\ta\tb\nb\tb\ta\n").unwrap_err();
        assert!(matches!(err, LexiconError::Integrity(_)), "{err}");
    }

    #[test]
    fn malformed_line_names_line_number() {
        let err = LexicalGraph::from_fixture_tsv("a\ta\t\nbroken line\n").unwrap_err();
        match err {
            LexiconError::Malformed { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn paths() {
        let g = animals();
        assert_eq!(g.shortest_path_length("dog", "dog"), Some(0));
        assert_eq!(g.shortest_path_length("dog", "cat"), Some(4));
        assert_eq!(g.shortest_path_length("dog", "canine"), Some(1));
        assert_eq!(g.shortest_path_length("DOG", "unobtainium"), None);
        assert_eq!(g.shortest_path_length("domestic dog", "canid"), Some(1));
    }

    #[test]
    fn closures() {
        let g = animals();
        assert_eq!(g.synset_count("unknown"), 0);
        assert_eq!(g.synset_count("dog"), 1);
        assert_eq!(g.hypernym_count("dog"), 2);
        assert_eq!(g.hyponym_count("carnivore"), 4);
        assert_eq!(g.hyponym_count("dog"), 0);
        assert_eq!(g.hypernym_count("unknown"), 0);
    }

    #[test]
    fn shared_ancestor_counted_once() {
        // diamond: d -> b, d -> c, b -> a, c -> a
        let g = LexicalGraph::from_fixture_tsv("a\ta\t\nb\tb\ta\nc\tc\ta\nd\td\tb,c\n").unwrap();
        assert_eq!(g.hypernym_count("d"), 3);
        assert_eq!(g.hyponym_count("a"), 3);
    }
}
