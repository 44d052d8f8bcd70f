//! Seeded generators for the bundled offline data: a five-topic snippet
//! corpus and an AOL-style log of short real-user queries.
//!
//! The shipped files under `data/` were produced by these functions with
//! [`STANDARD_SEED`]; regenerate them with `cargo run -p distortion-core
//! --example regen_data`.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::lexicon::Lexicon;
use crate::obfuscator::{
    assemble_query, generate_batch, parse_pattern_set, AssembleOptions, BatchOptions, CategoryPattern, IntentQuery,
    ObfuscatedQuery, ObfuscationError, STANDARD_PATTERNS,
};
use crate::searchsim::{CorpusDoc, MAX_SNIPPET_CHARS};

pub const STANDARD_SEED: u64 = 2014;
pub const STANDARD_DOCS_PER_TOPIC: usize = 200;
pub const TOPICS: [&str; 5] = ["cars", "smartphones", "fashion", "travel", "news"];

/// Cars documents that explicitly advertise buying a 2014 Toyota.
pub const TOYOTA_DEALER_DOCS: usize = 120;

const MAKES: &[(&str, &[&str])] = &[
    ("Toyota", &["Camry", "Corolla", "Prius", "RAV4", "Tacoma"]),
    ("Honda", &["Civic", "Accord", "CR-V", "Pilot"]),
    ("Ford", &["Fusion", "Focus", "Escape", "F-150"]),
    ("Chevrolet", &["Malibu", "Cruze", "Silverado", "Equinox"]),
    ("Jeep", &["Wrangler", "Cherokee", "Compass"]),
    ("Fiat", &["500", "Panda"]),
    ("GMC", &["Sierra", "Terrain", "Acadia"]),
];

const CAR_ACTIONS: &[&str] = &["Buy", "Sell", "Lease", "Finance", "Repair", "Review", "Compare", "Insure"];
const CAR_WORDS: &[&str] = &[
    "sedan", "dealership", "mileage", "engine", "hybrid", "warranty", "horsepower", "trade-in",
    "SUV", "pickup", "transmission", "fuel economy", "test drive", "safety rating", "interior",
];
const DEALERS: &[&str] = &[
    "Allan Nott Auto", "Sunset Auto", "Smart Auto Saving", "Jeff Wyler Motors", "Lakeside Motors",
    "Metro Auto Mall",
];

const PHONE_BRANDS: &[&str] = &["Samsung Galaxy", "iPhone", "Motorola Moto", "LG", "Nokia Lumia", "HTC One"];
const PHONE_WORDS: &[&str] = &[
    "battery", "screen", "camera", "apps", "unlocked", "carrier", "data plan", "android", "storage",
    "charger", "signal", "tablet", "cloud backup", "processor",
];
const CARRIERS: &[&str] = &["T-Mobile", "Verizon", "AT&T", "Sprint"];

const FASHION_ITEMS: &[&str] = &[
    "running shoes", "sneakers", "leather boots", "sandals", "high heels", "dress shoes", "handbags",
    "denim jackets", "summer dresses",
];
const FASHION_WORDS: &[&str] = &[
    "outlet", "sale", "discount", "collection", "designer", "sizes", "free shipping", "returns",
    "style", "comfort", "trend", "catalog",
];
const FASHION_SHOPS: &[&str] = &["Zappos", "Nike", "Online Shoes", "Nordstrom", "Foot Locker", "shoes.com"];

const PLACES: &[&str] = &[
    "Nairobi Kenya", "Kampala Uganda", "Mombasa", "Zanzibar", "Cape Town", "Lake Victoria", "Serengeti",
    "Addis Ababa",
];
const TRAVEL_WORDS: &[&str] = &[
    "safari", "flights", "hotel", "visa", "beach", "tour", "itinerary", "resort", "backpacking",
    "airport", "guide", "wildlife",
];

const NEWS_SUBJECTS: &[&str] = &[
    "western civilization", "the Roman empire", "the Blue Jays", "Peyton Manning", "the election",
    "the weather forecast", "world markets", "the influence of media", "ancient Greece", "the Olympics",
];
const NEWS_WORDS: &[&str] = &[
    "history", "analysis", "lecture", "report", "influence", "culture", "season", "forecast", "debate",
    "scholars", "headlines", "coverage",
];
const OUTLETS: &[&str] = &["CNN", "BBC", "Reuters", "The Guardian", "Fox News", "LA Times"];

fn pick<'a, R: Rng>(rng: &mut R, items: &[&'a str]) -> &'a str {
    items.choose(rng).copied().expect("non-empty list")
}

fn year<R: Rng>(rng: &mut R) -> u32 {
    rng.gen_range(2011..=2015)
}

fn clip(mut snippet: String) -> String {
    if snippet.chars().count() > MAX_SNIPPET_CHARS {
        let cut: String = snippet.chars().take(MAX_SNIPPET_CHARS).collect();
        snippet = match cut.rfind(' ') {
            Some(i) => cut[..i].to_string(),
            None => cut,
        };
    }
    snippet
}

fn slug(s: &str) -> String {
    s.to_lowercase()
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '-' })
        .collect()
}

fn car_doc<R: Rng>(rng: &mut R, i: usize) -> (String, String, Vec<String>) {
    let dealer = pick(rng, DEALERS);
    if i < TOYOTA_DEALER_DOCS {
        let model = pick(rng, MAKES[0].1);
        // Few repeats of the intent terms, so these pages compete with decoy
        // matches on score rather than topping every ranking.
        let title = format!("{dealer}: Toyota {model} specials");
        let snippet = format!(
            "Buy a 2014 {model} from our Toyota lot. Certified {w1} options, low {w2} and a {w3} included.",
            w1 = pick(rng, CAR_WORDS),
            w2 = pick(rng, CAR_WORDS),
            w3 = pick(rng, CAR_WORDS),
        );
        let mut cats = vec!["cars".to_string()];
        if rng.gen_bool(0.3) {
            cats.push("financing".into());
        }
        return (title, snippet, cats);
    }
    // Other car makes dominate; Toyota still shows up in reviews and repairs.
    let (make, models) = if rng.gen_bool(0.15) {
        MAKES[0]
    } else {
        MAKES[rng.gen_range(1..MAKES.len())]
    };
    let model = pick(rng, models);
    let action = pick(rng, &CAR_ACTIONS[1..]);
    let y = year(rng);
    let title = format!("{action} the {y} {make} {model}");
    let snippet = format!(
        "{action} your {make} {model} with confidence. Our {y} guide covers {w1}, {w2} and {w3}. Visit {dealer} for a {w4}.",
        w1 = pick(rng, CAR_WORDS),
        w2 = pick(rng, CAR_WORDS),
        w3 = pick(rng, CAR_WORDS),
        w4 = pick(rng, CAR_WORDS),
    );
    let mut cats = vec!["cars".to_string()];
    if action == "Finance" || action == "Lease" || action == "Insure" {
        cats.push("financing".into());
    }
    (title, snippet, cats)
}

fn phone_doc<R: Rng>(rng: &mut R) -> (String, String, Vec<String>) {
    let brand = pick(rng, PHONE_BRANDS);
    let carrier = pick(rng, CARRIERS);
    let y = year(rng);
    let verb = pick(rng, &["Get", "Compare", "Unlock", "Trade in", "Upgrade", "Review"]);
    let title = format!("{verb} the {brand} on {carrier}");
    let snippet = format!(
        "{verb} a {brand} phone for {y}: better {w1}, longer {w2} and new {w3}. {carrier} offers a {w4} with every smartphone.",
        w1 = pick(rng, PHONE_WORDS),
        w2 = pick(rng, PHONE_WORDS),
        w3 = pick(rng, PHONE_WORDS),
        w4 = pick(rng, PHONE_WORDS),
    );
    let mut cats = vec!["smartphones".to_string()];
    if rng.gen_bool(0.35) {
        cats.push("it".into());
    }
    (title, snippet, cats)
}

fn fashion_doc<R: Rng>(rng: &mut R) -> (String, String, Vec<String>) {
    let item = pick(rng, FASHION_ITEMS);
    let shop = pick(rng, FASHION_SHOPS);
    let y = year(rng);
    let title = format!("{shop}: {item} {y} collection");
    let snippet = format!(
        "Shop {item} at {shop}. The {y} {w1} brings {w2}, {w3} and {w4} on shoes and apparel.",
        w1 = pick(rng, FASHION_WORDS),
        w2 = pick(rng, FASHION_WORDS),
        w3 = pick(rng, FASHION_WORDS),
        w4 = pick(rng, FASHION_WORDS),
    );
    (title, snippet, vec!["fashion".to_string()])
}

fn travel_doc<R: Rng>(rng: &mut R) -> (String, String, Vec<String>) {
    let place = pick(rng, PLACES);
    let other = pick(rng, PLACES);
    let y = year(rng);
    let title = format!("{place} travel guide {y}");
    let snippet = format!(
        "Plan your trip to {place}: {w1}, {w2} and {w3}. Many visitors continue to {other} for a {w4}.",
        w1 = pick(rng, TRAVEL_WORDS),
        w2 = pick(rng, TRAVEL_WORDS),
        w3 = pick(rng, TRAVEL_WORDS),
        w4 = pick(rng, TRAVEL_WORDS),
    );
    (title, snippet, vec!["travel".to_string()])
}

fn news_doc<R: Rng>(rng: &mut R) -> (String, String, Vec<String>) {
    let subject = pick(rng, NEWS_SUBJECTS);
    let outlet = pick(rng, OUTLETS);
    let y = year(rng);
    let title = format!("{outlet}: {subject} in {y}");
    let snippet = format!(
        "{outlet} {w1} on {subject}. Experts discuss {w2}, {w3} and the {w4} behind the {y} story.",
        w1 = pick(rng, NEWS_WORDS),
        w2 = pick(rng, NEWS_WORDS),
        w3 = pick(rng, NEWS_WORDS),
        w4 = pick(rng, NEWS_WORDS),
    );
    (title, snippet, vec!["news".to_string()])
}

/// Five topics × `per_topic` snippets. The first [`TOYOTA_DEALER_DOCS`]
/// car documents (capped at `per_topic`) mention buying a 2014 Toyota.
pub fn synthetic_corpus(per_topic: usize, seed: u64) -> Vec<CorpusDoc> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut docs = Vec::with_capacity(per_topic * TOPICS.len());
    for topic in TOPICS {
        for i in 0..per_topic {
            let (title, snippet, categories) = match topic {
                "cars" => car_doc(&mut rng, i),
                "smartphones" => phone_doc(&mut rng),
                "fashion" => fashion_doc(&mut rng),
                "travel" => travel_doc(&mut rng),
                _ => news_doc(&mut rng),
            };
            let id = format!("{topic}-{i:04}");
            docs.push(CorpusDoc {
                url: format!("https://{}.example.com/{}", topic, slug(&title)),
                id,
                title,
                snippet: clip(snippet),
                categories,
            });
        }
    }
    docs
}

/// The bundled 1,000-document corpus.
pub fn standard_corpus() -> Vec<CorpusDoc> {
    synthetic_corpus(STANDARD_DOCS_PER_TOPIC, STANDARD_SEED)
}

const REAL_NAV: &[&str] = &[
    "google", "yahoo.com", "myspace", "ebay", "www.bankofamerica.com", "mapquest", "craigslist",
    "hotmail.com", "amazon", "youtube", "weather.com", "aol mail", "msn", "walmart.com", "target",
];
const REAL_CITIES: &[&str] = &[
    "chicago", "las vegas", "orlando", "new york", "houston", "miami", "seattle", "denver", "boston",
    "atlanta",
];
const REAL_THINGS: &[&str] = &[
    "lyrics", "recipes", "coupons", "jobs", "apartments", "movie times", "obituaries", "tickets",
    "horoscope", "lottery results", "white pages", "school closings",
];
const REAL_PEOPLE: &[&str] = &[
    "britney spears", "american idol", "paris hilton", "tom cruise", "oprah", "nascar", "jessica simpson",
    "world series",
];
const REAL_QUESTIONS: &[&str] = &[
    "how to lose weight", "what is a roth ira", "how to tie a tie", "symptoms of flu",
    "how to get rid of ants", "what is myspace", "how to write a resume", "when is easter",
];
const REAL_SHOPPING: &[&str] = &[
    "used cars", "cheap flights", "digital cameras", "laptops", "prom dresses", "furniture", "ipod",
    "cell phones", "mortgage rates", "car insurance",
];

fn real_query<R: Rng>(rng: &mut R) -> String {
    match rng.gen_range(0..6) {
        0 => pick(rng, REAL_NAV).to_string(),
        1 => format!("{} {}", pick(rng, REAL_CITIES), pick(rng, REAL_THINGS)),
        2 => pick(rng, REAL_PEOPLE).to_string(),
        3 => pick(rng, REAL_QUESTIONS).to_string(),
        4 => format!("{} in {}", pick(rng, REAL_SHOPPING), pick(rng, REAL_CITIES)),
        _ => {
            let extra = pick(rng, &["for sale", "reviews", "prices", "deals", "online"]);
            format!("{} {extra}", pick(rng, REAL_SHOPPING))
        }
    }
}

/// `n` short user-style queries.
pub fn real_style_queries(n: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| real_query(&mut rng)).collect()
}

/// Renders queries in the AOL TSV layout with a header row.
pub fn to_aol_tsv(queries: &[String], seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = String::from("AnonID\tQuery\tQueryTime\tItemRank\tClickURL\n");
    let mut minute = 0u32;
    for q in queries {
        let user = 1000 + rng.gen_range(0..60);
        minute += rng.gen_range(1..30);
        let day = 1 + (minute / 1440) % 28;
        let (h, m) = ((minute / 60) % 24, minute % 60);
        out.push_str(&format!("{user}\t{q}\t2006-03-{day:02} {h:02}:{m:02}:00\t\t\n"));
    }
    out
}

/// Queries in the bundled real-user log.
pub const STANDARD_REAL_QUERIES: usize = 400;

/// Small corpus and one NITP query that retrieves 106 documents, 53 of
/// them relevant to "buy a toyota 2014".
pub fn q17_fixture() -> (Vec<CorpusDoc>, ObfuscatedQuery) {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut docs = Vec::new();
    let push = |docs: &mut Vec<CorpusDoc>, prefix: &str, title: String, snippet: String| {
        let id = format!("{prefix}-{:03}", docs.len());
        docs.push(CorpusDoc {
            url: format!("https://q17.example.com/{id}"),
            id,
            title,
            snippet,
            categories: vec![prefix.to_string()],
        });
    };
    for _ in 0..53 {
        let model = pick(&mut rng, MAKES[0].1);
        let dealer = pick(&mut rng, DEALERS);
        push(
            &mut docs,
            "rel",
            format!("Buy a Toyota {model} 2014"),
            format!("{dealer} helps you buy the 2014 Toyota {model} with a {}.", pick(&mut rng, CAR_WORDS)),
        );
    }
    // Each of these shares at least one query term but misses the intent.
    for i in 0..53 {
        let (title, snippet) = match i % 4 {
            0 => (
                format!("Toyota {} {} review", pick(&mut rng, MAKES[0].1), rng.gen_range(2008..=2012)),
                format!("Owners rate the {} and the {}.", pick(&mut rng, CAR_WORDS), pick(&mut rng, CAR_WORDS)),
            ),
            1 => (
                format!("Book flights to {}", pick(&mut rng, PLACES)),
                format!("Cheap {} and {} deals.", pick(&mut rng, TRAVEL_WORDS), pick(&mut rng, TRAVEL_WORDS)),
            ),
            2 => (
                format!("BBC {} 2014", pick(&mut rng, NEWS_WORDS)),
                format!("Coverage of {} this year.", pick(&mut rng, NEWS_SUBJECTS)),
            ),
            _ => (
                format!("Lakers 2013 {}", pick(&mut rng, NEWS_WORDS)),
                format!("Buy tickets and follow the {} of the season.", pick(&mut rng, NEWS_WORDS)),
            ),
        };
        push(&mut docs, "near", title, snippet);
    }
    for _ in 0..40 {
        let item = pick(&mut rng, FASHION_ITEMS);
        push(
            &mut docs,
            "other",
            // shoes.com would match the "com" in bbc.com
            format!("{} {item}", pick(&mut rng, &FASHION_SHOPS[..5])),
            format!("Fresh {} with {}.", pick(&mut rng, FASHION_WORDS), pick(&mut rng, FASHION_WORDS)),
        );
    }
    let query = ObfuscatedQuery {
        id: "Q17".into(),
        pattern: "NITP".parse().expect("valid pattern"),
        segments: vec![
            "bbc.com".into(),
            "buy a toyota 2014".into(),
            "book flights".into(),
            "lakers 2013".into(),
        ],
        intent_index: 1,
        intent_appended: false,
    };
    (docs, query)
}

/// Labelled attack fixture: the standard 15-pattern batch at eight queries
/// per pattern plus the original and one extra NITPL query (122 total),
/// and a 248-row real-user log.
pub fn distortion_vs_real_fixture(lexicon: &Lexicon) -> Result<(Vec<ObfuscatedQuery>, String), ObfuscationError> {
    const SEED: u64 = 0xD157;
    let intent = IntentQuery::new("buy a toyota 2014", lexicon)?;
    let patterns = parse_pattern_set(STANDARD_PATTERNS).expect("standard patterns parse");
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let options = BatchOptions {
        per_pattern: 8,
        include_original: true,
        assemble: AssembleOptions::default(),
    };
    let mut batch = generate_batch(&intent, &patterns, lexicon, &options, &mut rng)?;
    let extra: CategoryPattern = "NITPL".parse().expect("valid pattern");
    let id = format!("Q{}", batch.len() + 1);
    batch.push(assemble_query(id, &intent, &extra, lexicon, &options.assemble, &mut rng)?);
    let real = real_style_queries(248, SEED + 1);
    Ok((batch, to_aol_tsv(&real, SEED + 2)))
}

pub fn docs_to_jsonl(docs: &[CorpusDoc]) -> String {
    docs.iter()
        .map(|d| serde_json::to_string(d).expect("doc serializes") + "\n")
        .collect()
}

pub fn queries_to_jsonl(queries: &[ObfuscatedQuery]) -> String {
    queries.iter().map(|q| q.to_json_line() + "\n").collect()
}

/// `(relative path, contents)` for every generated file under `data/`.
pub fn bundled_files(lexicon: &Lexicon) -> Result<Vec<(String, String)>, ObfuscationError> {
    let (q17_docs, q17_query) = q17_fixture();
    let (obfuscated, real) = distortion_vs_real_fixture(lexicon)?;
    let real_log = real_style_queries(STANDARD_REAL_QUERIES, STANDARD_SEED + 1);
    Ok(vec![
        ("corpus.jsonl".into(), docs_to_jsonl(&standard_corpus())),
        ("real_queries.tsv".into(), to_aol_tsv(&real_log, STANDARD_SEED + 2)),
        ("fixtures/q17_corpus.jsonl".into(), docs_to_jsonl(&q17_docs)),
        ("fixtures/q17_query.jsonl".into(), queries_to_jsonl(&[q17_query])),
        ("fixtures/distortion-vs-real-v1/obfuscated.jsonl".into(), queries_to_jsonl(&obfuscated)),
        ("fixtures/distortion-vs-real-v1/real.tsv".into(), real),
    ])
}
