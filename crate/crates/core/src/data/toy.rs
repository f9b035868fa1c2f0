//! Synthetic dialogue pairs for smoke tests, examples, and scaled-down runs.
//!
//! Each pair comes from an intent with a few source paraphrases and a response
//! template. Slots shared between the two sides make the response depend on
//! the meaning of the whole input rather than on word alignment alone.

use std::collections::HashSet;

use crate::data::corpus::{tokenize, TextPair};
use crate::nn::rng::SplitMix64;

const NAMES: &[&str] = &[
    "david", "maria", "tom", "anna", "li", "sam", "kate", "omar", "yuki", "paul", "nina", "jack",
    "emma", "raj", "lucy", "ben", "sara", "ivan", "mei", "leo",
];
const FOODS: &[&str] = &[
    "pizza", "noodles", "rice", "apples", "cheese", "fish", "soup", "cake", "tea", "coffee",
    "bread", "salad", "pasta", "eggs", "juice", "beef",
];
const CITIES: &[&str] = &[
    "paris", "beijing", "london", "tokyo", "cairo", "lima", "oslo", "rome", "delhi", "boston",
    "madrid", "seoul", "sydney", "dublin", "vienna", "berlin",
];
const DAYS: &[&str] = &[
    "monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday", "tonight",
];
const PLACES: &[&str] = &[
    "park", "beach", "museum", "library", "cinema", "market", "zoo", "gym", "bank", "station",
    "cafe", "hotel",
];
const ITEMS: &[&str] = &[
    "shirt", "phone", "book", "bike", "lamp", "watch", "bag", "chair", "camera", "ticket",
    "coat", "hat",
];
const NUMBERS: &[&str] = &["two", "three", "four", "five", "six", "seven", "eight", "nine", "ten"];
const EVENTS: &[&str] = &["meeting", "movie", "class", "party", "game", "concert", "show", "dinner"];
const FEELINGS: &[&str] = &["tired", "happy", "sad", "bored", "hungry", "busy", "sick", "nervous"];

const SLOTS: &[(&str, &[&str])] = &[
    ("{name}", NAMES),
    ("{food}", FOODS),
    ("{city}", CITIES),
    ("{day}", DAYS),
    ("{place}", PLACES),
    ("{item}", ITEMS),
    ("{number}", NUMBERS),
    ("{event}", EVENTS),
    ("{feeling}", FEELINGS),
];

/// (source paraphrases, response). Every slot in a response also appears in
/// its source, so the response is a deterministic function of the input.
const INTENTS: &[(&[&str], &str)] = &[
    (
        &["my name is {name} , i live in {city} and i like {food} .", "i am {name} from {city} and i love {food} ."],
        "nice to meet you {name} , is {food} good in {city} ?",
    ),
    (
        &["do you want {food} at the {place} on {day} ?", "shall we have {food} at the {place} on {day} ?"],
        "sure , {food} at the {place} on {day} sounds good .",
    ),
    (
        &["let us go to the {place} with {name} on {day} .", "can we visit the {place} with {name} on {day} ?"],
        "ok , see you and {name} at the {place} on {day} .",
    ),
    (
        &["how much is this {item} at the {place} ? i have {number} dollars .", "i want a {item} from the {place} for {number} dollars ."],
        "the {item} at the {place} costs {number} dollars .",
    ),
    (
        &["when does the {event} in {city} start on {day} ?", "what time is the {event} in {city} on {day} ?"],
        "the {event} in {city} on {day} starts at noon .",
    ),
    (
        &["{name} feels {feeling} after the {event} .", "the {event} made {name} {feeling} ."],
        "why did the {event} make {name} {feeling} ?",
    ),
    (
        &["how do i get from {city} to the {place} in {number} minutes ?", "can i reach the {place} from {city} in {number} minutes ?"],
        "take the bus from {city} , the {place} is {number} stops away .",
    ),
    (
        &["can you call {name} about the {event} on {day} ?", "please tell {name} about the {event} on {day} ."],
        "sure , i will tell {name} about the {event} on {day} .",
    ),
    (
        &["{name} wants {number} {food} now .", "{name} is hungry for {number} {food} ."],
        "let us buy {number} {food} for {name} .",
    ),
];

/// Draws one word per slot and returns a template filler.
fn draw_slots(rng: &mut SplitMix64) -> impl Fn(&str) -> String {
    let choice: Vec<(&str, &str)> = SLOTS
        .iter()
        .map(|(key, words)| (*key, words[rng.below(words.len())]))
        .collect();
    move |t: &str| {
        let mut out = t.to_string();
        for (key, word) in &choice {
            out = out.replace(key, word);
        }
        out
    }
}

/// `n` pairs with distinct sources, deterministic in `seed`. Capped at the
/// number of distinct sources the templates can produce (over 30K).
pub fn dialogues(n: usize, seed: u64) -> Vec<TextPair> {
    let mut rng = SplitMix64::substream(seed, "toy-dialogues");
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0usize;
    while out.len() < n && attempts < n * 200 + 1000 {
        attempts += 1;
        let (sources, response) = INTENTS[rng.below(INTENTS.len())];
        let template = sources[rng.below(sources.len())];
        let fill = draw_slots(&mut rng);
        let source = fill(template);
        if seen.insert(source.clone()) {
            out.push(TextPair {
                source: tokenize(&source, true),
                target: tokenize(&fill(response), true),
            });
        }
    }
    out
}

/// 32 short fixed exchanges, for overfitting checks.
pub const SMALL_TALK: [(&str, &str); 32] = [
    ("hi there", "hello , nice to see you ."),
    ("how are you ?", "i am fine , thanks ."),
    ("what is your name ?", "my name is bot ."),
    ("where do you live ?", "i live in the cloud ."),
    ("do you like music ?", "yes , i love jazz ."),
    ("what time is it ?", "it is almost noon ."),
    ("are you hungry ?", "no , i just ate ."),
    ("good night", "sleep well !"),
    ("thank you so much", "you are welcome ."),
    ("what is the weather like ?", "it is sunny today ."),
    ("can you help me ?", "sure , what do you need ?"),
    ("i am tired", "you should get some rest ."),
    ("let us play a game", "ok , you go first ."),
    ("do you have a pet ?", "i have a small cat ."),
    ("what do you do ?", "i answer questions ."),
    ("see you tomorrow", "see you , take care ."),
    ("i lost my keys", "check your coat pocket ."),
    ("is it going to rain ?", "maybe later tonight ."),
    ("what are you reading ?", "a book about the sea ."),
    ("where is the station ?", "turn left at the bank ."),
    ("i passed my exam", "congratulations , well done !"),
    ("how old are you ?", "i am two years old ."),
    ("do you want coffee ?", "tea for me , please ."),
    ("what is your favorite color ?", "blue , like the sky ."),
    ("i feel sick", "please see a doctor ."),
    ("can we meet on friday ?", "friday works for me ."),
    ("how much is this ?", "it costs ten dollars ."),
    ("do you speak french ?", "only a little ."),
    ("tell me a joke", "i forgot the punch line ."),
    ("what did you eat ?", "rice and fish ."),
    ("happy birthday !", "thanks , i am so happy ."),
    ("where are my shoes ?", "under the bed ."),
];

/// [`SMALL_TALK`] as tokenized pairs.
pub fn small_talk() -> Vec<TextPair> {
    SMALL_TALK
        .iter()
        .map(|(x, y)| TextPair {
            source: tokenize(x, true),
            target: tokenize(y, true),
        })
        .collect()
}

/// Renders pairs in the `source<TAB>target` corpus format.
pub fn to_tsv(pairs: &[TextPair]) -> String {
    pairs
        .iter()
        .map(|p| format!("{}\t{}\n", p.source.join(" "), p.target.join(" ")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distinct_and_deterministic() {
        let a = dialogues(200, 5);
        assert_eq!(a.len(), 200);
        assert_eq!(a, dialogues(200, 5));
        let sources: HashSet<_> = a.iter().map(|p| p.source.clone()).collect();
        assert_eq!(sources.len(), 200);
        assert!(a.iter().all(|p| !p.source.is_empty() && !p.target.is_empty()));
    }

    #[test]
    fn small_talk_is_distinct() {
        let p = small_talk();
        let sources: HashSet<_> = p.iter().map(|p| p.source.clone()).collect();
        let targets: HashSet<_> = p.iter().map(|p| p.target.clone()).collect();
        assert_eq!((sources.len(), targets.len()), (32, 32));
    }

    #[test]
    fn large_sample_available() {
        assert_eq!(dialogues(6000, 1).len(), 6000);
    }

    #[test]
    fn tsv_parses_back() {
        let a = dialogues(10, 1);
        let c = crate::data::parse_corpus(&to_tsv(&a), std::path::Path::new("toy"), true).unwrap();
        assert_eq!(c.pairs, a);
    }
}
