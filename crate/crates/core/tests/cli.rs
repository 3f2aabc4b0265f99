//! End-to-end tests of the `kspdg` binary: exit codes, artifact shapes,
//! seed determinism, and cross-mode agreement, all on small generated
//! graphs written to disk in `.gr` format.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use kspdg::graph::{emit_dimacs, Graph};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_kspdg"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn kspdg")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf8 stdout")
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("utf8 stderr")
}

/// Writes a seeded random connected graph as `dir/g.gr` and returns its path.
fn write_graph(dir: &Path, n: usize, extra: usize, max_w: u32, seed: u64) -> PathBuf {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = Graph::random_connected(n, extra, max_w, &mut rng);
    let p = dir.join("g.gr");
    let mut bytes = Vec::new();
    emit_dimacs(&g, &mut bytes).unwrap();
    std::fs::write(&p, bytes).unwrap();
    p
}

fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf8 path")
}

#[test]
fn usage_and_data_errors_use_distinct_exit_codes() {
    let out = run(&[]);
    assert_eq!(code(&out), 1, "no subcommand is a usage error");

    let out = run(&["frobnicate"]);
    assert_eq!(code(&out), 1, "unknown subcommand is a usage error");

    let dir = tempfile::tempdir().unwrap();
    let g = write_graph(dir.path(), 10, 5, 9, 1);
    let out = run(&["run", "--graph", path_str(&g), "--mode", "bogus"]);
    assert_eq!(code(&out), 1, "bad flag value is a usage error");

    let out = run(&["partition", "--graph", "/nonexistent/g.gr"]);
    assert_eq!(code(&out), 2, "unreadable input is a data error");
    assert!(stderr(&out).starts_with("error: "));

    let bad = dir.path().join("bad.gr");
    std::fs::write(&bad, "p sp 3 1\na 1 9 4\n").unwrap();
    let out = run(&["partition", "--graph", path_str(&bad)]);
    assert_eq!(code(&out), 2);
    let err = stderr(&out);
    assert!(
        err.contains("bad.gr") && err.contains("line 2"),
        "parse errors name file and line: {err}"
    );

    let out = run(&["--help"]);
    assert_eq!(code(&out), 0, "--help is not an error");
}

#[test]
fn partition_output_covers_every_vertex() {
    let dir = tempfile::tempdir().unwrap();
    let g = write_graph(dir.path(), 24, 14, 9, 2);
    let out = run(&["partition", "--graph", path_str(&g), "--z", "6"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("subgraph_id,vertex_id,is_boundary"));
    let mut seen = [false; 24];
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 3, "row {line}");
        seen[fields[1].parse::<usize>().unwrap()] = true;
        assert!(matches!(fields[2], "0" | "1"));
    }
    assert!(seen.iter().all(|&s| s), "every vertex appears in some subgraph");
}

#[test]
fn generated_streams_and_queries_are_seed_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let g = write_graph(dir.path(), 20, 12, 9, 3);
    let gen = |seed: &str| {
        let out = run(&[
            "gen-stream", "--graph", path_str(&g), "--alpha", "0.5", "--tau", "0.5",
            "--snapshots", "4", "--seed", seed,
        ]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        stdout(&out)
    };
    let a = gen("11");
    assert_eq!(a, gen("11"), "same seed, same stream bytes");
    assert_ne!(a, gen("12"), "different seed, different stream");
    assert!(a.lines().all(|l| l.starts_with("t=")), "trace line format");

    let genq = |seed: &str| {
        let out = run(&[
            "gen-queries", "--graph", path_str(&g), "--count", "8", "--k-max", "4",
            "--seed", seed,
        ]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        stdout(&out)
    };
    let a = genq("5");
    assert_eq!(a, genq("5"));
    assert_ne!(a, genq("6"));
    assert!(a.starts_with("query_id,s,t,k\n"));
    assert_eq!(a.lines().count(), 9, "header plus one row per query");
}

#[test]
fn build_index_writes_the_four_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let g = write_graph(dir.path(), 24, 16, 9, 4);
    let idx = dir.path().join("idx");
    let out = run(&[
        "build-index", "--graph", path_str(&g), "--z", "6", "--xi", "3",
        "--out-dir", path_str(&idx),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("subgraphs: "), "{text}");
    assert!(text.contains("compaction ratio: "), "{text}");
    assert!(text.contains("estimated worst-case index elements: "), "{text}");

    let read = |name: &str| std::fs::read_to_string(idx.join(name)).expect(name);
    let bounds = read("bounds.csv");
    assert!(bounds.starts_with("sg,src,dst,phi,actual,bound\n"));
    assert!(bounds.lines().count() > 1, "some boundary pair exists");
    let skeleton = read("skeleton.csv");
    assert!(skeleton.starts_with("u,v,weight,argmin_sg\n"));
    let compaction = read("compaction.csv");
    assert!(compaction.starts_with("sg,node_count,element_count,ratio\n"));
    let tree = read("mptree.txt");
    assert!(
        tree.lines()
            .all(|l| l.trim_start().starts_with("path:") || l.trim_start().starts_with("tail:")),
        "tree dump holds only path:/tail: nodes"
    );
    assert!(tree.lines().any(|l| l.trim_start().starts_with("tail:")));
}

/// Reads `results.csv` records into (query, rank) -> distance string.
fn distances(dir: &Path) -> BTreeMap<(u64, u32), String> {
    let text = std::fs::read_to_string(dir.join("results.csv")).unwrap();
    let mut out = BTreeMap::new();
    for line in text.lines() {
        let fields: Vec<&str> = line.splitn(4, ',').collect();
        assert_eq!(fields.len(), 4, "record {line}");
        let qid: u64 = fields[0].parse().unwrap();
        let rank: u32 = fields[1].parse().unwrap();
        assert!(!fields[3].is_empty(), "vertex list present");
        out.insert((qid, rank), fields[2].to_string());
    }
    out
}

#[test]
fn identical_seeds_give_byte_identical_run_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let g = write_graph(dir.path(), 26, 18, 9, 5);
    let stream = dir.path().join("stream.txt");
    let queries = dir.path().join("queries.csv");
    let out = run(&[
        "gen-stream", "--graph", path_str(&g), "--alpha", "0.4", "--tau", "0.5",
        "--snapshots", "3", "--seed", "21", "--out", path_str(&stream),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let out = run(&[
        "gen-queries", "--graph", path_str(&g), "--count", "6", "--k-max", "4",
        "--seed", "22", "--out", path_str(&queries),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let run_mode = |mode: &str, sub: &str| {
        let out_dir = dir.path().join(sub);
        let out = run(&[
            "run", "--graph", path_str(&g), "--z", "8", "--stream", path_str(&stream),
            "--queries", path_str(&queries), "--mode", mode, "--seed", "7",
            "--out-dir", path_str(&out_dir),
        ]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        out_dir
    };
    let a = run_mode("ksp-dg", "a");
    let b = run_mode("ksp-dg", "b");
    for name in ["results.csv", "counters.csv", "messages.csv"] {
        assert_eq!(
            std::fs::read(a.join(name)).unwrap(),
            std::fs::read(b.join(name)).unwrap(),
            "{name} must be byte-identical across identical-seed runs"
        );
    }
    // aggregate.csv carries wall-clock timing; check shape, not bytes.
    let agg = std::fs::read_to_string(a.join("aggregate.csv")).unwrap();
    assert!(agg.starts_with("mode,queries,z,xi,k_default,"));
    assert!(agg.lines().nth(1).unwrap().starts_with("ksp-dg,6,8,"));

    // The oracle baseline agrees on every (query, rank) distance.
    let yen = run_mode("yen", "yen");
    assert_eq!(distances(&a), distances(&yen));
}

#[test]
fn validate_exit_codes_reflect_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let g = write_graph(dir.path(), 22, 14, 9, 6);
    let base = [
        "validate", "--graph", path_str(&g), "--z", "6", "--alpha", "0.4",
        "--snapshots", "3", "--queries", "6", "--k-max", "3", "--seed", "13",
    ];
    let out = run(&base);
    assert_eq!(code(&out), 0, "{}{}", stdout(&out), stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("PASS pinned-snapshot-oracle"), "{text}");
    assert!(!text.contains("FAIL"), "{text}");

    let mut faulted = base.to_vec();
    faulted.extend(["--inject-fault", "corrupt-lbd"]);
    let out = run(&faulted);
    assert_eq!(code(&out), 3, "failed validation exits 3");
    let text = stdout(&out);
    assert!(text.contains("FAIL"), "{text}");
    assert!(text.contains("pinned-snapshot-oracle"), "{text}");

    let mut unknown = base.to_vec();
    unknown.extend(["--inject-fault", "set-on-fire"]);
    assert_eq!(code(&run(&unknown)), 1, "unknown fault is a usage error");
}

#[test]
fn report_aggregates_counter_files() {
    let dir = tempfile::tempdir().unwrap();
    let counters = dir.path().join("counters.csv");
    std::fs::write(
        &counters,
        "query_id,iterations,reuse_hits,pruned_tasks,subgraph_invocations\n\
         0,4,2,1,8\n\
         1,6,0,3,10\n",
    )
    .unwrap();
    let out = run(&["report", path_str(&counters)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("file,queries,mean_iterations,mean_reuse_hits,mean_pruned_tasks,mean_subgraph_invocations")
    );
    let row = lines.next().unwrap();
    assert!(row.ends_with(",2,5.000,1.000,2.000,9.000"), "{row}");
    assert!(lines.next().is_none());

    let out = run(&["report"]);
    assert_eq!(code(&out), 1, "report requires at least one file");

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "1,2,3\n").unwrap();
    let out = run(&["report", path_str(&bad)]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("bad.csv:1"));
}
