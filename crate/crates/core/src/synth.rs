//! Seeded generator of labelled corpora for classifier evaluation.
//!
//! Positive methods (sensor data access and sensor control) live mostly in
//! resource-named units, use sensor-flavoured method names, parameters and
//! return types, and carry bodies with OAL keywords. Negative methods come
//! from unrelated system services. A minority of each class crosses over
//! (positives in neutral units, permission checks inside sensor services) so
//! the class boundary is not a single feature.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::classifier::Labels;
use crate::corpus::{
    CallTarget, Lang, MethodRecord, Param, ReturnValue, Side, SourcePos, Stmt, UnitDecl,
};
use crate::corpus::{Corpus, MethodId};
use crate::defaults;
use crate::oal::{KeywordKind, OalTable};
use crate::uppt::Resource;

pub const MIN_METHODS: usize = 20;
const METHODS_PER_UNIT: usize = 8;
const SYNTH_FILE: &str = "synthetic.mfw";

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub corpus: Corpus,
    /// Labels after noise.
    pub labels: Labels,
    /// Labels before noise.
    pub clean_labels: Labels,
    pub oal: OalTable,
}

struct Profile {
    resource: Resource,
    units: &'static [&'static str],
    nouns: &'static [&'static str],
    process: &'static str,
    lang: Lang,
}

const PROFILES: [Profile; 6] = [
    Profile {
        resource: Resource::Gps,
        units: &[
            "GpsLocationProvider",
            "LocationManagerService",
            "GnssLocationProvider",
            "FusedLocationProvider",
        ],
        nouns: &[
            "Location",
            "Fix",
            "Navigating",
            "LocationUpdates",
            "Provider",
        ],
        process: "system_server",
        lang: Lang::Java,
    },
    Profile {
        resource: Resource::Camera,
        units: &[
            "CameraService",
            "CameraClient",
            "CameraHardwareInterface",
            "CameraDevice",
        ],
        nouns: &["Preview", "Picture", "Camera", "Frame", "Capture"],
        process: "mediaserver",
        lang: Lang::Cpp,
    },
    Profile {
        resource: Resource::Microphone,
        units: &[
            "AudioFlinger",
            "RecordThread",
            "AudioRecordHandle",
            "AudioInputStream",
        ],
        nouns: &["Input", "Recording", "Buffer", "Stream", "Record"],
        process: "mediaserver",
        lang: Lang::Cpp,
    },
    Profile {
        resource: Resource::Wifi,
        units: &[
            "WifiStateMachine",
            "WifiService",
            "WifiNative",
            "WifiScanner",
        ],
        nouns: &["Scan", "ScanResults", "Network", "Supplicant", "Connection"],
        process: "system_server",
        lang: Lang::Java,
    },
    Profile {
        resource: Resource::Bluetooth,
        units: &[
            "AdapterService",
            "BluetoothManagerService",
            "BluetoothAdapterState",
            "BluetoothGatt",
        ],
        nouns: &["Discovery", "Devices", "Adapter", "Bond", "Gatt"],
        process: "com_android_bluetooth",
        lang: Lang::Java,
    },
    Profile {
        resource: Resource::OnboardSensors,
        units: &[
            "SensorService",
            "SensorDevice",
            "SensorEventConnection",
            "NativeSensorManager",
        ],
        nouns: &["Sensor", "Events", "Sampling", "Batch", "Channel"],
        process: "system_server",
        lang: Lang::Cpp,
    },
];

const POS_VERBS: [&str; 11] = [
    "start", "get", "on", "enable", "open", "capture", "scan", "read", "discover", "connect",
    "take",
];
const POS_SUFFIXES: [&str; 5] = ["", "Callback", "Event", "Report", "Locked"];
const POS_PARAMS: [(&str, &str); 10] = [
    ("ILocationListener", "listener"),
    ("IBinder", "callback"),
    ("AudioBuffer", "buffer"),
    ("sensors_event_t", "event"),
    ("IMemory", "dataPtr"),
    ("String", "provider"),
    ("int", "cameraId"),
    ("int", "audioSource"),
    ("int", "frameCount"),
    ("ScanSettings", "scanSettings"),
];
const POS_RETURNS: [&str; 8] = [
    "void",
    "boolean",
    "int",
    "Location",
    "CameraFrame",
    "AudioBuffer",
    "ScanResult",
    "SensorEvent",
];

const NEG_UNITS: [&str; 12] = [
    "PowerManagerService",
    "PackageManagerService",
    "ActivityManagerService",
    "NotificationManagerService",
    "AccountManagerService",
    "AlarmManagerService",
    "StorageManagerService",
    "DisplayManagerService",
    "InputMethodManagerService",
    "WindowManagerService",
    "ClipboardService",
    "JobSchedulerService",
];
const NEG_VERBS: [&str; 12] = [
    "set", "update", "remove", "check", "query", "dump", "notify", "resolve", "install",
    "schedule", "finish", "grant",
];
const NEG_NOUNS: [&str; 10] = [
    "Package",
    "Permission",
    "Account",
    "Alarm",
    "Volume",
    "Display",
    "Window",
    "Task",
    "Policy",
    "User",
];
const NEG_PARAMS: [(&str, &str); 8] = [
    ("String", "packageName"),
    ("int", "uid"),
    ("int", "flags"),
    ("Intent", "intent"),
    ("IBinder", "token"),
    ("int", "userId"),
    ("long", "when"),
    ("String", "tag"),
];
const NEG_RETURNS: [&str; 6] = ["void", "boolean", "int", "String", "List", "Bundle"];
const NEG_TOKENS: [&str; 6] = [
    "DUMP",
    "INSTALL",
    "BROADCAST",
    "WAKE_UP",
    "SET_ALARM",
    "GRANT",
];

fn pick<'a, T>(rng: &mut ChaCha8Rng, xs: &'a [T]) -> &'a T {
    xs.choose(rng).expect("non-empty table")
}

/// One generated method before it is placed in a unit.
struct Draft {
    positive: bool,
    resource: Option<Resource>,
    unit: String,
    record: MethodRecord,
}

fn keyword_body(rng: &mut ChaCha8Rng, oal: &OalTable, r: Resource) -> Vec<Stmt> {
    let ops: Vec<_> = oal
        .operations()
        .values()
        .filter(|o| o.resource == r)
        .collect();
    let op = pick(rng, &ops);
    let mut body = Vec::new();
    let mut ret = ReturnValue::None;
    for k in &op.keywords {
        if !rng.gen_bool(0.7) && !body.is_empty() {
            continue;
        }
        match k.kind {
            KeywordKind::SdsType => {
                let var = "data".to_string();
                body.push(Stmt::VarDecl {
                    ty: k.text.clone(),
                    name: var.clone(),
                });
                ret = ReturnValue::Var(var);
            }
            KeywordKind::IpcInterface | KeywordKind::HwInterface => {
                body.push(Stmt::Call(CallTarget {
                    qualifier: None,
                    name: k.text.clone(),
                }))
            }
            KeywordKind::CommandConst => body.push(Stmt::Tok(k.text.clone())),
        }
    }
    body.push(Stmt::Return(ret));
    body
}

fn positive(rng: &mut ChaCha8Rng, oal: &OalTable, crossover: bool) -> Draft {
    let p = pick(rng, &PROFILES);
    let unit = if crossover {
        pick(rng, &NEG_UNITS).to_string()
    } else {
        pick(rng, p.units).to_string()
    };
    let name = format!(
        "{}{}{}",
        pick(rng, &POS_VERBS),
        pick(rng, p.nouns),
        pick(rng, &POS_SUFFIXES)
    );
    let mut params = Vec::new();
    for _ in 0..rng.gen_range(usize::from(crossover)..=2) {
        let (ty, n) = pick(rng, &POS_PARAMS);
        if params.iter().any(|p: &Param| p.name == *n) {
            continue;
        }
        params.push(Param {
            ty: ty.to_string(),
            name: n.to_string(),
        });
    }
    let ret = pick(rng, &POS_RETURNS).to_string();
    let body = keyword_body(rng, oal, p.resource);
    Draft {
        positive: true,
        resource: Some(p.resource),
        unit,
        record: MethodRecord::new(&unit_placeholder(), &name, params, &ret, body),
    }
}

fn negative(rng: &mut ChaCha8Rng, crossover: bool) -> Draft {
    let unit = if crossover {
        let p = pick(rng, &PROFILES);
        pick(rng, p.units).to_string()
    } else {
        pick(rng, &NEG_UNITS).to_string()
    };
    let name = format!("{}{}", pick(rng, &NEG_VERBS), pick(rng, &NEG_NOUNS));
    let mut params = Vec::new();
    for _ in 0..rng.gen_range(0..=3) {
        let (ty, n) = pick(rng, &NEG_PARAMS);
        if params.iter().any(|p: &Param| p.name == *n) {
            continue;
        }
        params.push(Param {
            ty: ty.to_string(),
            name: n.to_string(),
        });
    }
    let ret = pick(rng, &NEG_RETURNS).to_string();
    let mut body = vec![Stmt::Tok(pick(rng, &NEG_TOKENS).to_string())];
    if rng.gen_bool(0.3) {
        body.push(Stmt::VarDecl {
            ty: "Bundle".into(),
            name: "extras".into(),
        });
    }
    body.push(Stmt::Return(ReturnValue::None));
    Draft {
        positive: false,
        resource: None,
        unit,
        record: MethodRecord::new(&unit_placeholder(), &name, params, &ret, body),
    }
}

fn unit_placeholder() -> String {
    "_".into()
}

/// Generates `n_methods` methods, half of them positive, in units of at most
/// eight methods each. Each label is flipped with probability `noise_rate`.
///
/// # Panics
/// If `n_methods < 20` or `noise_rate` is outside `[0, 0.5)`.
pub fn generate_synthetic_corpus(seed: u64, n_methods: usize, noise_rate: f64) -> SyntheticCorpus {
    assert!(
        n_methods >= MIN_METHODS,
        "n_methods must be at least {MIN_METHODS}"
    );
    assert!(
        (0.0..0.5).contains(&noise_rate),
        "noise_rate must lie in [0, 0.5)"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let oal = defaults::oal();

    let n_pos = n_methods / 2;
    let mut drafts: Vec<Draft> = (0..n_methods)
        .map(|i| {
            let crossover = rng.gen_bool(0.1);
            if i < n_pos {
                positive(&mut rng, &oal, crossover)
            } else {
                negative(&mut rng, crossover)
            }
        })
        .collect();
    drafts.shuffle(&mut rng);

    // Group by base unit name, then split into numbered units.
    let mut by_unit: std::collections::BTreeMap<String, Vec<Draft>> = Default::default();
    for d in drafts {
        by_unit.entry(d.unit.clone()).or_default().push(d);
    }
    let mut units = Vec::new();
    let mut clean = Labels::new();
    for (base, group) in by_unit {
        for (k, chunk) in group.chunks(METHODS_PER_UNIT).enumerate() {
            let uname = if k == 0 {
                base.clone()
            } else {
                format!("{base}{k}")
            };
            let profile = chunk
                .iter()
                .find_map(|d| d.resource)
                .and_then(|r| PROFILES.iter().find(|p| p.resource == r));
            let mut methods: Vec<MethodRecord> = Vec::new();
            for (j, d) in chunk.iter().enumerate() {
                let r = &d.record;
                let mut name = r.name.clone();
                if methods.iter().any(|m| m.name == name) {
                    name = format!("{name}{j}");
                }
                let mut body = r.body.clone();
                // Positives call an earlier positive sibling to form chains.
                if d.positive {
                    if let Some(prev) = methods.iter().rev().find(|m| clean[&m.id] == 1) {
                        body.insert(
                            0,
                            Stmt::Call(CallTarget {
                                qualifier: Some(uname.clone()),
                                name: prev.name.clone(),
                            }),
                        );
                    }
                }
                let m = MethodRecord::new(&uname, &name, r.params.clone(), &r.return_type, body);
                clean.insert(m.id.clone(), u8::from(d.positive));
                methods.push(m);
            }
            let (process, lang) =
                profile.map_or(("system_server", Lang::Java), |p| (p.process, p.lang));
            units.push(UnitDecl {
                name: uname,
                process: process.to_string(),
                side: Side::Service,
                lang,
                methods,
                pos: SourcePos {
                    file: SYNTH_FILE.into(),
                    ..Default::default()
                },
            });
        }
    }

    let labels: Labels = clean
        .iter()
        .map(|(id, &l)| {
            let flip = rng.gen_bool(noise_rate);
            (id.clone(), if flip { 1 - l } else { l })
        })
        .collect();
    let corpus = Corpus::new(units, vec![SYNTH_FILE.into()]).expect("generated ids are unique");
    SyntheticCorpus {
        corpus,
        labels,
        clean_labels: clean,
        oal,
    }
}

/// Ids whose noisy label differs from the clean one.
pub fn flipped(s: &SyntheticCorpus) -> Vec<MethodId> {
    s.labels
        .iter()
        .filter(|(id, l)| s.clean_labels.get(*id) != Some(l))
        .map(|(id, _)| id.clone())
        .collect()
}
