//! Data shipped with the crate: feature lexicon, OAL table, layer-1 map,
//! sample corpus with labels, and six sample privacy preference tables.

use crate::classifier::{FeatureLexicon, Labels};
use crate::corpus::{parse_corpus, Corpus};
use crate::mapping::Layer1Map;
use crate::oal::OalTable;
use crate::uppt::{parse_uppt, Uppt};

pub const LEXICON_JSON: &str = include_str!("../data/lexicon.json");
pub const OAL_JSON: &str = include_str!("../data/oal.json");
pub const LAYER1_JSON: &str = include_str!("../data/layer1.json");
pub const LABELS_JSON: &str = include_str!("../data/labels.json");

/// Sample corpus files as (name, text).
pub const SAMPLE_CORPUS: [(&str, &str); 7] = [
    ("audio.mfw", include_str!("../data/corpus/audio.mfw")),
    (
        "bluetooth.mfw",
        include_str!("../data/corpus/bluetooth.mfw"),
    ),
    ("camera.mfw", include_str!("../data/corpus/camera.mfw")),
    ("location.mfw", include_str!("../data/corpus/location.mfw")),
    ("sensors.mfw", include_str!("../data/corpus/sensors.mfw")),
    ("system.mfw", include_str!("../data/corpus/system.mfw")),
    ("wifi.mfw", include_str!("../data/corpus/wifi.mfw")),
];

/// Sample UPPTs as (profile name, JSON text).
pub const SAMPLE_UPPTS: [(&str, &str); 6] = [
    ("location", include_str!("../data/uppt/location.json")),
    (
        "location_onboardsensor",
        include_str!("../data/uppt/location_onboardsensor.json"),
    ),
    (
        "location_payment",
        include_str!("../data/uppt/location_payment.json"),
    ),
    ("calling", include_str!("../data/uppt/calling.json")),
    ("payment", include_str!("../data/uppt/payment.json")),
    (
        "location_wifi",
        include_str!("../data/uppt/location_wifi.json"),
    ),
];

pub fn lexicon() -> FeatureLexicon {
    serde_json::from_str(LEXICON_JSON).expect("shipped lexicon is valid")
}

pub fn oal() -> OalTable {
    serde_json::from_str(OAL_JSON).expect("shipped OAL table is valid")
}

pub fn layer1() -> Layer1Map {
    Layer1Map::from_json(LAYER1_JSON, &oal()).expect("shipped layer-1 map is valid")
}

pub fn labels() -> Labels {
    serde_json::from_str(LABELS_JSON).expect("shipped labels are valid")
}

pub fn sample_corpus() -> Corpus {
    let files: Vec<(String, String)> = SAMPLE_CORPUS
        .iter()
        .map(|(n, t)| (n.to_string(), t.to_string()))
        .collect();
    parse_corpus(&files).expect("shipped corpus parses")
}

pub fn sample_uppts() -> Vec<(&'static str, Uppt)> {
    SAMPLE_UPPTS
        .iter()
        .map(|(n, t)| (*n, parse_uppt(t).expect("shipped UPPT is valid")))
        .collect()
}

pub fn sample_uppt(name: &str) -> Option<Uppt> {
    SAMPLE_UPPTS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| parse_uppt(t).expect("shipped UPPT is valid"))
}
