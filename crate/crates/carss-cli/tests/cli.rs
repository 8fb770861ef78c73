//! Binary-level tests: exit codes, byte-determinism of emitted files, and
//! the render pipeline.

use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_carss"))
}

fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "command {:?} failed: {}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

#[test]
fn usage_errors_exit_2() {
    let out = run(&["solve", "--algo"]); // missing value
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn oversize_exact_solver_exits_3() {
    let out = run(&["solve", "--algo", "held-karp", "--n", "25", "--count", "1"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("too large"));
}

#[test]
fn unknown_solver_and_missing_files_exit_3() {
    let out = run(&["solve", "--algo", "lkh", "--n", "10", "--count", "1"]);
    assert_eq!(out.status.code(), Some(3));
    let out = run(&["solve", "--algo", "fi", "--instances", "/nonexistent/path.carss"]);
    assert_eq!(out.status.code(), Some(3));
    let out = run(&["solve", "--algo", "carss", "--n", "10", "--count", "1"]);
    assert_eq!(out.status.code(), Some(3), "carss without checkpoint");
}

#[test]
fn malformed_instance_file_exits_3_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.carss");
    std::fs::write(&path, "carss-tsp v1\nn 4\n0 0\n1 zero\n1 1\n0 1\n").unwrap();
    let out = run(&["solve", "--algo", "fi", "--instances", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 4"));
}

#[test]
fn generate_then_solve_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let inst_dir = dir.path().join("inst");
    run_ok(&[
        "generate",
        "--n",
        "12",
        "--count",
        "2",
        "--seed",
        "9",
        "--out",
        inst_dir.to_str().unwrap(),
    ]);
    let entries: Vec<_> = std::fs::read_dir(&inst_dir).unwrap().collect();
    assert_eq!(entries.len(), 2);
    let out = run_ok(&[
        "solve",
        "--algo",
        "ni",
        "--instances",
        inst_dir.to_str().unwrap(),
        "--seed",
        "1",
    ]);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("instance_id,n,K,algo,obj,gap_pct,wall_ms,seed"));
    assert_eq!(stdout.lines().count(), 3);
}

#[test]
fn solve_csv_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        run_ok(&[
            "solve",
            "--algo",
            "ri",
            "--n",
            "30",
            "--count",
            "8",
            "--seed",
            "11",
            "--out",
            out.to_str().unwrap(),
        ]);
    }
    assert_eq!(
        std::fs::read(&a).unwrap(),
        std::fs::read(&b).unwrap(),
        "same seed must produce byte-identical CSV"
    );
}

#[test]
fn bench_outputs_report_and_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("bench");
    let out = run_ok(&[
        "bench",
        "--algos",
        "fi,ri,ni",
        "--n",
        "16",
        "--count",
        "4",
        "--seed",
        "3",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.contains("fi") && table.contains("ri") && table.contains("ni"));
    let rows = std::fs::read_to_string(out_dir.join("bench_rows.csv")).unwrap();
    assert_eq!(rows.lines().count(), 1 + 3 * 4);
    let report = std::fs::read_to_string(out_dir.join("bench_report.csv")).unwrap();
    assert_eq!(report.lines().count(), 1 + 3);

    // reported means match recomputation from the emitted rows
    for line in report.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        let algo = cols[0];
        let mean_obj: f64 = cols[3].parse().unwrap();
        let objs: Vec<f64> = rows
            .lines()
            .skip(1)
            .filter(|r| r.split(',').nth(3) == Some(algo))
            .map(|r| r.split(',').nth(4).unwrap().parse().unwrap())
            .collect();
        let recomputed = objs.iter().sum::<f64>() / objs.len() as f64;
        assert!(
            (mean_obj - recomputed).abs() <= 1e-9,
            "{algo}: {mean_obj} vs {recomputed}"
        );
    }
}

fn assert_well_formed_xml(text: &str) {
    // minimal scanner: every tag closes, attributes quoted
    let mut stack: Vec<String> = Vec::new();
    let mut rest = text;
    while let Some(start) = rest.find('<') {
        let end = rest[start..].find('>').expect("unclosed tag") + start;
        let tag = &rest[start + 1..end];
        rest = &rest[end + 1..];
        if tag.starts_with('?') || tag.starts_with('!') {
            continue;
        }
        if let Some(name) = tag.strip_prefix('/') {
            let open = stack.pop().unwrap_or_else(|| panic!("stray </{name}>"));
            assert_eq!(open, name, "mismatched closing tag");
        } else if !tag.ends_with('/') {
            let name: String = tag.split_whitespace().next().unwrap().to_string();
            stack.push(name);
        }
        assert_eq!(tag.matches('"').count() % 2, 0, "unbalanced quotes in <{tag}>");
    }
    assert!(stack.is_empty(), "unclosed tags: {stack:?}");
}

#[test]
fn render_produces_well_formed_svg_with_n_edges() {
    let dir = tempfile::tempdir().unwrap();
    let svg_path = dir.path().join("tour.svg");
    let trace_path = dir.path().join("trace.jsonl");
    run_ok(&[
        "render",
        "--n",
        "10",
        "--seed",
        "4",
        "--k",
        "3",
        "--out",
        svg_path.to_str().unwrap(),
        "--trace",
        trace_path.to_str().unwrap(),
    ]);
    let svg = std::fs::read_to_string(&svg_path).unwrap();
    assert_well_formed_xml(&svg);

    // n=10, K=3: 3 solid subpath colors and K+|I| = 4 dashed merge edges
    let solid = svg.matches("class=\"subpath\"").count();
    let dashed = svg.matches("class=\"merge\"").count();
    assert_eq!(solid + dashed, 10, "drawn edges must equal n");
    assert_eq!(dashed, 4);
    let mut colors: Vec<&str> = svg
        .lines()
        .filter(|l| l.contains("class=\"subpath\""))
        .map(|l| {
            let i = l.find("stroke=\"").unwrap() + 8;
            &l[i..i + 7]
        })
        .collect();
    colors.sort();
    colors.dedup();
    assert_eq!(colors.len(), 3, "one solid color per agent");
    assert_eq!(svg.matches("class=\"start\"").count(), 3);
    assert_eq!(svg.matches("class=\"isolated\"").count(), 1);

    // trace file re-renders identically through --from-trace
    let inst_dir = dir.path().join("inst");
    run_ok(&[
        "generate",
        "--n",
        "10",
        "--count",
        "1",
        "--seed",
        "4",
        "--out",
        inst_dir.to_str().unwrap(),
    ]);
    let inst_file = std::fs::read_dir(&inst_dir)
        .unwrap()
        .next()
        .unwrap()
        .unwrap()
        .path();
    let svg2_path = dir.path().join("tour2.svg");
    run_ok(&[
        "render",
        "--from-trace",
        trace_path.to_str().unwrap(),
        "--instance",
        inst_file.to_str().unwrap(),
        "--out",
        svg2_path.to_str().unwrap(),
    ]);
    assert_eq!(
        std::fs::read(&svg_path).unwrap(),
        std::fs::read(&svg2_path).unwrap()
    );
}

#[test]
fn output_is_invariant_to_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let (one, four) = (dir.path().join("t1.csv"), dir.path().join("t4.csv"));
    for (threads, out) in [("1", &one), ("4", &four)] {
        run_ok(&[
            "--threads",
            threads,
            "solve",
            "--algo",
            "ri",
            "--n",
            "24",
            "--count",
            "6",
            "--seed",
            "13",
            "--out",
            out.to_str().unwrap(),
        ]);
    }
    assert_eq!(std::fs::read(&one).unwrap(), std::fs::read(&four).unwrap());
}

#[test]
fn tsplib_instances_are_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("five.tsp");
    std::fs::write(
        &path,
        "NAME: five\nTYPE: TSP\nDIMENSION: 5\nEDGE_WEIGHT_TYPE: EUC_2D\nNODE_COORD_SECTION\n1 0.0 0.0\n2 1.0 0.0\n3 1.0 1.0\n4 0.0 1.0\n5 0.5 0.5\nEOF\n",
    )
    .unwrap();
    let out = run_ok(&["solve", "--algo", "brute-force", "--instances", path.to_str().unwrap()]);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("five,5,1,brute-force"));
}

#[test]
fn tours_and_assignment_dump() {
    let dir = tempfile::tempdir().unwrap();
    // tiny checkpoint for the carss solver
    let train_out = dir.path().join("train");
    let cfg_path = dir.path().join("train.toml");
    std::fs::write(
        &cfg_path,
        "epochs = 1\nbatches_per_epoch = 1\ninstances_per_batch = 2\nn = 12\nk = 2\nseed = 3\n",
    )
    .unwrap();
    run_ok(&[
        "train",
        "--config",
        cfg_path.to_str().unwrap(),
        "--out",
        train_out.to_str().unwrap(),
    ]);
    let ck = train_out.join("checkpoint.bin");

    let tours_dir = dir.path().join("tours");
    let dump = dir.path().join("assignment.csv");
    run_ok(&[
        "solve",
        "--algo",
        "carss",
        "--checkpoint",
        ck.to_str().unwrap(),
        "--n",
        "12",
        "--count",
        "2",
        "--seed",
        "6",
        "--out",
        dir.path().join("rows.csv").to_str().unwrap(),
        "--tours",
        tours_dir.to_str().unwrap(),
        "--dump-assignment",
        dump.to_str().unwrap(),
    ]);

    // tour files: one line of indices then `length <value>`
    let mut tour_files: Vec<_> = std::fs::read_dir(&tours_dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    tour_files.sort();
    assert_eq!(tour_files.len(), 2);
    let text = std::fs::read_to_string(&tour_files[0]).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0].split_whitespace().count(), 12);
    assert!(lines[1].starts_with("length "));

    // assignment dump covers every unvisited vertex exactly once
    let dump_text = std::fs::read_to_string(&dump).unwrap();
    let mut rows: Vec<&str> = dump_text.lines().collect();
    assert_eq!(rows.remove(0), "vertex,agent,distance");
    assert_eq!(rows.len(), 12 - 2, "n minus K start vertices");
    for row in rows {
        let cols: Vec<&str> = row.split(',').collect();
        let agent: usize = cols[1].parse().unwrap();
        let dist: f64 = cols[2].parse().unwrap();
        assert!(agent < 2);
        assert!(dist >= 0.0);
    }

    // dump with a non-carss solver is a data error
    let out = run(&[
        "solve",
        "--algo",
        "fi",
        "--n",
        "12",
        "--count",
        "1",
        "--dump-assignment",
        dir.path().join("x.csv").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
}
