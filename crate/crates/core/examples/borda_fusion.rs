//! Fuse several ranked views into one ordering with Borda points.

use maas_core::route_recommender::{borda_fuse, RankMatrix, RankedList};

fn list(source: &str, ids: &[&str]) -> RankedList {
    RankedList { source: source.into(), route_ids: ids.iter().map(|s| s.to_string()).collect() }
}

fn main() {
    let matrix = RankMatrix::new(vec![
        list("personal", &["A", "B", "C", "D"]),
        list("plan_usage", &["B", "C", "A", "D"]),
        list("environmental", &["C", "B", "D", "A"]),
    ])
    .unwrap();
    for (i, f) in borda_fuse(&matrix).iter().enumerate() {
        println!("{}. {} ({} points)", i + 1, f.route_id, f.score);
    }

    // lists over different routes are rejected
    let err = RankMatrix::new(vec![list("a", &["A", "B"]), list("b", &["A", "C"])]).unwrap_err();
    println!("rejected: {err}");
}
