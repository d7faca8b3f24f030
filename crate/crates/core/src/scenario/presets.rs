//! Built-in scenarios, one per example system.

use super::{Scenario, ScenarioError};

pub struct Preset {
    pub name: &'static str,
    pub about: &'static str,
    pub text: &'static str,
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "bittorrent_baseline",
        about: "tracker (hybrid) + swarm with choke/unchoke and rarest-first, no reputation",
        text: r#"
seed = 1
duration_s = 600
overlay = "hm"
nodes = 21

[hm]
tracker_handout = 20

[swarm]
enabled = true
picker = "rarest_first"
choke = true
seed_count = 1
leecher_count = 19
freerider_count = 1
freerider_upload_bps = 0

[reputation]
enabled = false

[workload]
publish_count = 1
query_count = 5
"#,
    },
    Preset {
        name: "gnutella_flood",
        about: "unstructured overlay with TTL flooding under churn",
        text: r#"
seed = 1
duration_s = 300
overlay = "dum"
nodes = 200

[churn]
mean_session_s = 600
mean_offline_s = 300

[bootstrap]
mode = "peer_cache"

[topology]
model = "er"
alpha = 6
snapshot_period_s = 60

[dum]
ttl = 5
ping_period_s = 30

[workload]
publish_count = 40
query_count = 100
query_start_s = 10
query_interval_s = 2
"#,
    },
    Preset {
        name: "chord_lookup_bench",
        about: "256-node quiesced Chord ring, 1000 uniform-key lookups",
        text: r#"
seed = 1
duration_s = 20
overlay = "dsm"
nodes = 256

[dsm]
m_bits = 16
start = "quiesced"

[workload]
publish_count = 20
query_count = 0
lookup_count = 1000
query_start_s = 1
query_interval_s = 0.01
"#,
    },
    Preset {
        name: "emule_hybrid",
        about: "index server with update notifications + credit-ordered upload queues",
        text: r#"
seed = 1
duration_s = 900
overlay = "hm"
nodes = 17

[consistency]
mode = "hm_notify"

[hm]
reannounce_s = 60

[swarm]
enabled = true
choke = false
seed_count = 1
leecher_count = 12
freerider_count = 4

[reputation]
enabled = true

[workload]
publish_count = 10
query_count = 20
"#,
    },
    Preset {
        name: "layered_supernodes",
        about: "supernodes flood among themselves, churning leaves index at one supernode",
        text: r#"
seed = 1
duration_s = 300
overlay = "lm"
nodes = 500

[lm]
supernodes = 25

[churn]
mean_session_s = 300
mean_offline_s = 120

[topology]
model = "er"
alpha = 4
snapshot_period_s = 100

[dum]
ttl = 3

[workload]
publish_count = 50
query_count = 60
query_start_s = 5
query_interval_s = 4
"#,
    },
    Preset {
        name: "topology_suite",
        about: "ER, WS and BA graphs measured side by side, plus a BA-shaped flooding overlay",
        text: r#"
seed = 1
duration_s = 200
overlay = "dum"
nodes = 1000

[topology]
model = "ba"
m_attach = 2
n0 = 3
alpha = 8
k_ring = 8
p_rewire = 0.1
analyze = ["er", "ws", "ba"]
snapshot_period_s = 100

[dum]
peerview_max = 1000
ttl = 4

[workload]
publish_count = 20
query_count = 20
"#,
    },
];

pub fn names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|p| p.name)
}

pub fn find(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}

/// Parses the named preset; `None` when no preset has that name.
pub fn load(name: &str) -> Option<Result<Scenario, ScenarioError>> {
    find(name).map(|p| Scenario::from_toml(p.text))
}
