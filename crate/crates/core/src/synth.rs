//! Deterministic generator for the bundled mini-corpus.
//!
//! Every table is about one subject (a country) and one topic. Headers and a
//! category column draw on further concept groups. Each concept group has a
//! canonical word, used inside tables, and two synonyms that mostly appear
//! only in queries. A query names its subject plus one concept of its target
//! table. The concept comes from the caption topic, a header, or a cell
//! category, and is chosen so that it singles out the target among the
//! subject's tables. Word matching alone therefore sees little more than the
//! subject. The phrase table, word vectors and paraphrase pairs link
//! synonyms to their canonical words.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

use crate::error::{Error, Result};
use crate::features::subword::save_pairs;
use crate::features::EmbeddingTable;
use crate::math::{derive_seed, seeded_rng, SeededRng};
use crate::table::{save_corpus, save_queries, Corpus, LabeledQuery, Query, Table};

pub const SUBJECTS: [&str; 30] = [
    "france", "japan", "brazil", "kenya", "canada", "norway", "peru", "egypt", "india", "chile", "spain", "italy",
    "mexico", "ghana", "nepal", "cuba", "iran", "ireland", "fiji", "oman", "laos", "mali", "chad", "togo", "niger",
    "benin", "gabon", "haiti", "qatar", "yemen",
];

pub const TOPICS: [[&str; 3]; 20] = [
    ["population", "inhabitants", "populace"],
    ["rainfall", "precipitation", "downpour"],
    ["elevation", "altitude", "height"],
    ["revenue", "income", "earnings"],
    ["elections", "polls", "ballots"],
    ["airports", "airfields", "aerodromes"],
    ["universities", "colleges", "academies"],
    ["rivers", "streams", "waterways"],
    ["festivals", "celebrations", "carnivals"],
    ["museums", "galleries", "exhibitions"],
    ["hospitals", "clinics", "infirmaries"],
    ["railways", "railroads", "trains"],
    ["mountains", "peaks", "summits"],
    ["newspapers", "dailies", "periodicals"],
    ["stadiums", "arenas", "venues"],
    ["languages", "dialects", "tongues"],
    ["exports", "shipments", "outflows"],
    ["earthquakes", "quakes", "tremors"],
    ["bridges", "crossings", "viaducts"],
    ["parks", "reserves", "sanctuaries"],
];

pub const HEADERS: [[&str; 3]; 30] = [
    ["length", "extent", "span"],
    ["width", "breadth", "wideness"],
    ["capacity", "seating", "volume"],
    ["founded", "established", "inaugurated"],
    ["owner", "proprietor", "holder"],
    ["location", "site", "whereabouts"],
    ["director", "manager", "supervisor"],
    ["budget", "funding", "allocation"],
    ["visitors", "attendance", "turnout"],
    ["magnitude", "intensity", "strength"],
    ["distance", "mileage", "remoteness"],
    ["circulation", "readership", "distribution"],
    ["speakers", "users", "talkers"],
    ["ranking", "standing", "placement"],
    ["area", "surface", "acreage"],
    ["temperature", "warmth", "heat"],
    ["duration", "lasting", "timespan"],
    ["cost", "price", "expense"],
    ["architect", "designer", "planner"],
    ["enrollment", "enrolment", "intake"],
    ["beds", "cots", "berths"],
    ["passengers", "travellers", "riders"],
    ["winner", "victor", "champion"],
    ["percentage", "proportion", "share"],
    ["genre", "category", "kind"],
    ["editor", "redactor", "compiler"],
    ["opened", "unveiled", "launched"],
    ["operator", "carrier", "runner"],
    ["latitude", "parallel", "lat"],
    ["collection", "holdings", "archive"],
];

pub const CELLS: [[&str; 3]; 30] = [
    ["public", "state", "governmental"],
    ["private", "independent", "nonpublic"],
    ["active", "operational", "functioning"],
    ["closed", "defunct", "shuttered"],
    ["international", "global", "worldwide"],
    ["domestic", "national", "internal"],
    ["annual", "yearly", "perennial"],
    ["historic", "heritage", "ancient"],
    ["modern", "contemporary", "recent"],
    ["northern", "boreal", "arctic"],
    ["southern", "austral", "meridional"],
    ["coastal", "seaside", "littoral"],
    ["mountainous", "hilly", "highland"],
    ["urban", "metropolitan", "civic"],
    ["rural", "countryside", "agrarian"],
    ["principal", "main", "chief"],
    ["minor", "secondary", "lesser"],
    ["daily", "everyday", "diurnal"],
    ["weekly", "periodic", "recurring"],
    ["free", "gratis", "complimentary"],
    ["paid", "ticketed", "fee"],
    ["religious", "sacred", "spiritual"],
    ["military", "armed", "defence"],
    ["electric", "electrified", "powered"],
    ["steel", "iron", "metal"],
    ["stone", "masonry", "rock"],
    ["wooden", "timber", "lumber"],
    ["suspension", "hanging", "cable"],
    ["tropical", "equatorial", "humid"],
    ["volcanic", "igneous", "lava"],
];

const FILLERS: [&str; 7] = ["list", "of", "in", "the", "notable", "by", "name"];
const SYLLABLES: [&str; 16] = [
    "ka", "lo", "mi", "ru", "ten", "sa", "vo", "del", "ia", "ne", "po", "gar", "zu", "bel", "or", "ti",
];

/// Size and randomness of the generated data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub num_tables: usize,
    pub num_queries: usize,
    pub embedding_dim: usize,
    /// Chance that a query uses the canonical word instead of a synonym.
    pub canonical_rate: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            num_tables: 200,
            num_queries: 60,
            embedding_dim: 64,
            canonical_rate: 0.25,
            seed: 7,
        }
    }
}

/// Generated corpus, labeled queries and matching resources.
#[derive(Debug, Clone)]
pub struct SynthData {
    pub corpus: Corpus,
    pub queries: Vec<LabeledQuery>,
    /// Lines of `src ||| tgt ||| p(tgt|src) p(src|tgt)`.
    pub phrase_table: String,
    pub embeddings: EmbeddingTable,
    pub paraphrases: Vec<(String, String)>,
}

struct Blueprint {
    subject: usize,
    topic: usize,
    headers: Vec<usize>,
    cells: Vec<usize>,
    table: Table,
}

fn pseudo_word(rng: &mut SeededRng) -> String {
    let n = rng.random_range(2..4);
    (0..n).map(|_| *SYLLABLES.choose(rng).unwrap()).collect()
}

fn number(rng: &mut SeededRng) -> String {
    if rng.random_bool(0.5) {
        rng.random_range(10..5000).to_string()
    } else {
        format!("{:.1}", rng.random_range(0.0..100.0))
    }
}

fn make_table(rng: &mut SeededRng, id: usize, subject: usize, topic: usize) -> Blueprint {
    let mut header_ids: Vec<usize> = (0..HEADERS.len()).collect();
    header_ids.shuffle(rng);
    header_ids.truncate(rng.random_range(2..4));
    let mut cell_ids: Vec<usize> = (0..CELLS.len()).collect();
    cell_ids.shuffle(rng);
    cell_ids.truncate(rng.random_range(2..4));

    let mut headers = vec!["name".to_string()];
    headers.extend(header_ids.iter().map(|&h| HEADERS[h][0].to_string()));
    headers.push("type".to_string());

    let rows = rng.random_range(3..7);
    let mut cells = Vec::with_capacity(rows);
    for r in 0..rows {
        let mut row = Vec::with_capacity(headers.len());
        let entity = pseudo_word(rng);
        row.push(if r == 0 {
            format!("{entity} {}", SUBJECTS[subject])
        } else {
            entity
        });
        for _ in &header_ids {
            row.push(number(rng));
        }
        // every category appears at least once
        let c = if r < cell_ids.len() { cell_ids[r] } else { *cell_ids.choose(rng).unwrap() };
        row.push(CELLS[c][0].to_string());
        cells.push(row);
    }
    let topic_word = TOPICS[topic][0];
    let subject_word = SUBJECTS[subject];
    let caption = if rng.random_bool(0.1) {
        None
    } else {
        Some(match rng.random_range(0..4) {
            0 => format!("{topic_word} in {subject_word}"),
            1 => format!("list of {topic_word} in {subject_word}"),
            2 => format!("{subject_word} {topic_word}"),
            _ => format!("notable {topic_word} of {subject_word}"),
        })
    };
    Blueprint {
        subject,
        topic,
        headers: header_ids,
        cells: cell_ids,
        table: Table {
            id: format!("T{id:04}"),
            headers,
            cells,
            caption,
        },
    }
}

fn pick_word(rng: &mut SeededRng, group: &[&str; 3], canonical_rate: f64) -> String {
    if rng.random_bool(canonical_rate) {
        group[0].to_string()
    } else {
        group[rng.random_range(1..3)].to_string()
    }
}

fn query_text(rng: &mut SeededRng, subject: &str, concept: &str) -> String {
    match rng.random_range(0..4) {
        0 => format!("{concept} in {subject}"),
        1 => format!("{subject} {concept}"),
        2 => format!("{concept} of {subject}"),
        _ => format!("list {subject} {concept}"),
    }
}

/// Builds the corpus, queries and resources from `config.seed`.
pub fn generate(config: &SynthConfig) -> Result<SynthData> {
    let pairs = SUBJECTS.len() * TOPICS.len();
    if config.num_tables == 0 || config.num_tables > pairs {
        return Err(Error::Config(format!("num_tables must be in 1..={pairs}")));
    }
    let mut rng = seeded_rng(derive_seed(config.seed, "tables"));
    let mut combos: Vec<(usize, usize)> = (0..SUBJECTS.len())
        .flat_map(|s| (0..TOPICS.len()).map(move |t| (s, t)))
        .collect();
    combos.shuffle(&mut rng);
    combos.truncate(config.num_tables);
    combos.sort_unstable();
    let blueprints: Vec<Blueprint> = combos
        .iter()
        .enumerate()
        .map(|(i, &(s, t))| make_table(&mut rng, i, s, t))
        .collect();

    let queries = make_queries(&blueprints, config)?;
    let corpus = Corpus::from_tables(blueprints.into_iter().map(|b| b.table))?;
    Ok(SynthData {
        corpus,
        queries,
        phrase_table: phrase_table_text(config.seed),
        embeddings: embeddings(config)?,
        paraphrases: paraphrase_pairs(config.seed),
    })
}

fn make_queries(blueprints: &[Blueprint], config: &SynthConfig) -> Result<Vec<LabeledQuery>> {
    let mut rng = seeded_rng(derive_seed(config.seed, "queries"));
    let mut order: Vec<usize> = (0..blueprints.len()).collect();
    order.shuffle(&mut rng);
    let siblings = |b: &Blueprint| -> Vec<&Blueprint> {
        blueprints
            .iter()
            .filter(|o| o.subject == b.subject && o.table.id != b.table.id)
            .collect()
    };
    let mut out = Vec::with_capacity(config.num_queries);
    let mut used = BTreeSet::new();
    let mut kind = 0usize;
    for &i in order.iter().cycle().take(order.len() * 3) {
        if out.len() == config.num_queries {
            break;
        }
        let b = &blueprints[i];
        if used.contains(&i) {
            continue;
        }
        let others = siblings(b);
        if others.is_empty() {
            continue;
        }
        let concept = match kind % 3 {
            0 if b.table.caption.is_some() => Some(pick_word(&mut rng, &TOPICS[b.topic], config.canonical_rate)),
            1 => b
                .headers
                .iter()
                .copied()
                .filter(|h| others.iter().all(|o| !o.headers.contains(h)))
                .collect::<Vec<_>>()
                .choose(&mut rng)
                .map(|&h| pick_word(&mut rng, &HEADERS[h], config.canonical_rate)),
            2 => b
                .cells
                .iter()
                .copied()
                .filter(|c| others.iter().all(|o| !o.cells.contains(c)))
                .collect::<Vec<_>>()
                .choose(&mut rng)
                .map(|&c| pick_word(&mut rng, &CELLS[c], config.canonical_rate)),
            _ => None,
        };
        let Some(concept) = concept else { continue };
        used.insert(i);
        kind += 1;
        let text = query_text(&mut rng, SUBJECTS[b.subject], &concept);
        out.push(LabeledQuery {
            query: Query::new(format!("Q{:03}", out.len()), text),
            relevant: vec![b.table.id.clone()],
        });
    }
    if out.len() < config.num_queries {
        return Err(Error::Config(format!(
            "only {} distinguishable queries could be generated",
            out.len()
        )));
    }
    Ok(out)
}

fn all_words() -> BTreeSet<&'static str> {
    SUBJECTS
        .iter()
        .chain(FILLERS.iter())
        .chain(TOPICS.iter().flatten())
        .chain(HEADERS.iter().flatten())
        .chain(CELLS.iter().flatten())
        .chain(["type"].iter())
        .copied()
        .collect()
}

fn phrase_table_text(seed: u64) -> String {
    let mut rng = seeded_rng(derive_seed(seed, "phrases"));
    let mut s = String::new();
    // a private translation for every word
    for w in all_words() {
        let p: f64 = rng.random_range(0.6..0.95);
        let _ = writeln!(s, "{w} ||| {w}_x ||| {:.3} {:.3}", p, rng.random_range(0.6..0.95));
    }
    // synonyms share a pivot translation
    for (g, group) in TOPICS.iter().chain(HEADERS.iter()).chain(CELLS.iter()).enumerate() {
        for w in group {
            let _ = writeln!(
                s,
                "{w} ||| pivot{g} ||| {:.3} {:.3}",
                rng.random_range(0.3..0.7),
                rng.random_range(0.25..0.4)
            );
        }
    }
    s
}

fn embeddings(config: &SynthConfig) -> Result<EmbeddingTable> {
    let d = config.embedding_dim;
    let mut rng = seeded_rng(derive_seed(config.seed, "embeddings"));
    let gauss = |rng: &mut SeededRng, scale: f64| -> Vec<f64> {
        (0..d)
            .map(|_| {
                // sum of uniforms is close enough to normal here
                let u: f64 = (0..4).map(|_| rng.random_range(-1.0..1.0)).sum();
                u * scale / 1.15
            })
            .collect()
    };
    let mut table = EmbeddingTable::new(d)?;
    let round = |v: Vec<f64>| v.into_iter().map(|x| (x * 1e4).round() / 1e4).collect::<Vec<_>>();
    for group in TOPICS.iter().chain(HEADERS.iter()).chain(CELLS.iter()) {
        let center = gauss(&mut rng, 1.0);
        for w in group {
            let noise = gauss(&mut rng, 0.4);
            table.insert(*w, round(center.iter().zip(noise).map(|(c, n)| c + n).collect()))?;
        }
    }
    for w in SUBJECTS.iter().chain(FILLERS.iter()).chain(["type"].iter()) {
        let v = gauss(&mut rng, 1.0);
        table.insert(*w, round(v))?;
    }
    Ok(table)
}

fn paraphrase_pairs(seed: u64) -> Vec<(String, String)> {
    let mut rng = seeded_rng(derive_seed(seed, "paraphrases"));
    let mut out = Vec::new();
    for group in TOPICS.iter().chain(HEADERS.iter()).chain(CELLS.iter()) {
        for (a, b) in [(0, 1), (0, 2), (1, 2)] {
            for _ in 0..2 {
                let subject = SUBJECTS.choose(&mut rng).unwrap();
                let (x, y) = if rng.random_bool(0.5) { (group[a], group[b]) } else { (group[b], group[a]) };
                out.push((format!("{x} in {subject}"), format!("{subject} {y}")));
            }
        }
    }
    out.shuffle(&mut rng);
    out
}

/// File names used inside a data directory.
pub mod files {
    pub const TABLES: &str = "tables.jsonl";
    pub const QUERIES: &str = "queries.jsonl";
    pub const PHRASES: &str = "phrase_table.txt";
    pub const EMBEDDINGS: &str = "embeddings.txt";
    pub const PARAPHRASES: &str = "paraphrases.tsv";
}

impl SynthData {
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        save_corpus(&self.corpus, dir.join(files::TABLES))?;
        save_queries(&self.queries, dir.join(files::QUERIES))?;
        let pt = dir.join(files::PHRASES);
        fs::write(&pt, &self.phrase_table).map_err(|e| Error::io(&pt, e))?;
        self.embeddings.save(dir.join(files::EMBEDDINGS))?;
        save_pairs(&self.paraphrases, dir.join(files::PARAPHRASES))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::validate_regular;

    #[test]
    fn word_groups_are_disjoint() {
        let mut seen = BTreeSet::new();
        for w in SUBJECTS
            .iter()
            .chain(TOPICS.iter().flatten())
            .chain(HEADERS.iter().flatten())
            .chain(CELLS.iter().flatten())
            .chain(FILLERS.iter())
        {
            assert!(seen.insert(*w), "{w} repeated");
            assert_eq!(crate::text::tokenize(w), vec![w.to_string()]);
        }
    }

    #[test]
    fn generation_is_deterministic_and_regular() {
        let cfg = SynthConfig::default();
        let a = generate(&cfg).unwrap();
        let b = generate(&cfg).unwrap();
        assert_eq!(a.corpus.len(), 200);
        assert_eq!(a.queries.len(), 60);
        assert_eq!(a.corpus.tables(), b.corpus.tables());
        assert_eq!(a.phrase_table, b.phrase_table);
        assert!(a.corpus.iter().all(|t| validate_regular(t).is_regular));
        for q in &a.queries {
            assert!(a.corpus.get(&q.relevant[0]).is_some());
        }
    }
}
