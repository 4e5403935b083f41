use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use tempfile::TempDir;
use trajectory_index::{Rect, TrajectoryIndex};

fn ctix(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ctix"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn lines(o: &Output) -> Vec<String> {
    stdout(o).lines().map(str::to_string).collect()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Three boats on a 10x10 grid over 12 instants; `c` is silent at 5..=7.
fn fixture(dir: &TempDir) -> PathBuf {
    let mut csv = String::from("id,instant,row,col\n");
    for t in 0..12u32 {
        csv += &format!("a,{t},1,{}\n", t.min(9));
        csv += &format!("b,{t},{},5\n", 9 - (t / 2));
        if !(5..=7).contains(&t) {
            csv += &format!("c,{t},{},{}\n", 6 + t % 2, 2 + t % 3);
        }
    }
    let p = dir.path().join("fixture.csv");
    std::fs::write(&p, csv).unwrap();
    p
}

fn built(dir: &TempDir, extra: &[&str]) -> PathBuf {
    let out = dir.path().join("idx.ctix");
    let input = fixture(dir);
    let mut args = vec!["build", "-i", s(&input), "-o", s(&out)];
    args.extend_from_slice(extra);
    let o = ctix(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

#[test]
fn build_prints_stats_and_writes_index() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("idx.ctix");
    let input = fixture(&dir);
    let o = ctix(&["build", "-i", s(&input), "-o", s(&out), "--period", "4"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(out.exists());
    let text = stdout(&o);
    assert!(text.contains("total_bytes"));
    assert!(text.contains("snapshot_period"));
    let stats = ctix(&["stats", "-i", s(&out)]);
    assert!(lines(&stats).contains(&"snapshots,3".to_string()));
}

#[test]
fn missing_input_exits_2_without_output() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("idx.ctix");
    let o = ctix(&[
        "build",
        "-i",
        s(&dir.path().join("nope.csv")),
        "-o",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
    assert!(o.stdout.is_empty());
}

#[test]
fn bad_arguments_exit_2() {
    assert_eq!(
        ctix(&["query", "slice", "--rect", "1,2,3", "--t", "0"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(ctix(&["frobnicate"]).status.code(), Some(2));
    let dir = TempDir::new().unwrap();
    let idx = built(&dir, &[]);
    assert_eq!(
        ctix(&["query", "-i", s(&idx), "obj", "--id", "zz", "--t", "0"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        ctix(&["query", "-i", s(&idx), "obj", "--id", "a", "--t", "99"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn corrupt_index_exits_3() {
    let dir = TempDir::new().unwrap();
    let idx = built(&dir, &[]);
    let bytes = std::fs::read(&idx).unwrap();
    std::fs::write(&idx, &bytes[..bytes.len() - 7]).unwrap();
    assert_eq!(ctix(&["stats", "-i", s(&idx)]).status.code(), Some(3));
    std::fs::write(&idx, b"not an index").unwrap();
    assert_eq!(
        ctix(&["query", "-i", s(&idx), "obj", "--id", "a", "--t", "0"])
            .status
            .code(),
        Some(3)
    );
}

#[test]
fn object_queries_on_fixture() {
    let dir = TempDir::new().unwrap();
    let idx = built(&dir, &["--period", "4"]);
    let q = |id: &str, t: &str| {
        lines(&ctix(&[
            "query",
            "-i",
            s(&idx),
            "obj",
            "--id",
            id,
            "--t",
            t,
        ]))
    };
    assert_eq!(q("a", "4"), vec!["a,1,4"]);
    assert_eq!(q("b", "8"), vec!["b,5,5"]);
    assert_eq!(q("c", "6"), Vec::<String>::new());
    assert_eq!(q("c", "9"), vec!["c,7,2"]);
    let traj = lines(&ctix(&[
        "query",
        "-i",
        s(&idx),
        "traj",
        "--id",
        "c",
        "--from",
        "3",
        "--to",
        "9",
    ]));
    assert_eq!(traj, vec!["c,7,2,3", "c,6,3,4", "c,6,4,8", "c,7,2,9"]);
}

#[test]
fn period_one_roundtrips() {
    let dir = TempDir::new().unwrap();
    let idx = built(&dir, &["--period", "1"]);
    let o = ctix(&["query", "-i", s(&idx), "obj", "--id", "a", "--t", "11"]);
    assert_eq!(lines(&o), vec!["a,1,9"]);
}

#[test]
fn empty_slice_prints_nothing() {
    let dir = TempDir::new().unwrap();
    let idx = built(&dir, &[]);
    let o = ctix(&[
        "query",
        "-i",
        s(&idx),
        "slice",
        "--rect",
        "3,0,3,1",
        "--t",
        "5",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let o = ctix(&[
        "query",
        "-i",
        s(&idx),
        "slice",
        "--rect",
        "50,50,60,60",
        "--t",
        "5",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
}

#[test]
fn interval_is_union_of_slices() {
    let dir = TempDir::new().unwrap();
    let idx = built(&dir, &["--period", "5", "--bidirectional"]);
    let rect = "4,1,8,5";
    let mut first: BTreeMap<String, (u32, String)> = BTreeMap::new();
    for t in 2..=10u32 {
        let o = ctix(&[
            "query",
            "-i",
            s(&idx),
            "slice",
            "--rect",
            rect,
            "--t",
            &t.to_string(),
        ]);
        for l in lines(&o) {
            let (id, cell) = l.split_once(',').unwrap();
            first.entry(id.to_string()).or_insert((t, cell.to_string()));
        }
    }
    let want: Vec<String> = first
        .iter()
        .map(|(id, (t, c))| format!("{id},{c},{t}"))
        .collect();
    let o = ctix(&[
        "query",
        "-i",
        s(&idx),
        "interval",
        "--rect",
        rect,
        "--from",
        "2",
        "--to",
        "10",
    ]);
    assert_eq!(lines(&o), want);
    assert!(want.len() >= 2);
}

#[test]
fn answers_match_library() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("gen.csv");
    let idx_path = dir.path().join("gen.ctix");
    let o = ctix(&[
        "gen",
        "-o",
        s(&data),
        "--objects",
        "15",
        "--instants",
        "90",
        "--rows",
        "40",
        "--cols",
        "40",
        "--seed",
        "5",
    ]);
    assert!(o.status.success());
    assert!(ctix(&[
        "build",
        "-i",
        s(&data),
        "-o",
        s(&idx_path),
        "--period",
        "20"
    ])
    .status
    .success());
    let idx = TrajectoryIndex::load(&idx_path).unwrap();
    for (k, t) in [(0u32, 0u32), (3, 17), (7, 44), (14, 89)] {
        let id = idx.id(k).unwrap().to_string();
        let want: Vec<String> = idx
            .object_position(k, t)
            .unwrap()
            .map(|c| format!("{id},{},{}", c.row, c.col))
            .into_iter()
            .collect();
        assert_eq!(
            lines(&ctix(&[
                "query",
                "-i",
                s(&idx_path),
                "obj",
                "--id",
                &id,
                "--t",
                &t.to_string()
            ])),
            want
        );
        let rect = Rect::new(t % 20, 5, t % 20 + 15, 30);
        let want: Vec<String> = idx
            .time_slice(rect, t)
            .unwrap()
            .into_iter()
            .map(|(o, c)| format!("{},{},{}", idx.id(o).unwrap(), c.row, c.col))
            .collect();
        let r = format!("{},5,{},30", t % 20, t % 20 + 15);
        assert_eq!(
            lines(&ctix(&[
                "query",
                "-i",
                s(&idx_path),
                "slice",
                "--rect",
                &r,
                "--t",
                &t.to_string()
            ])),
            want
        );
    }
}

#[test]
fn config_file_with_flag_override() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("ctix.toml");
    std::fs::write(
        &cfg,
        "[build]\nperiod = 3\nbidirectional = true\naccumulators = 2\n",
    )
    .unwrap();
    let idx = built(&dir, &["--config", s(&cfg), "--period", "6"]);
    let stats = lines(&ctix(&["stats", "-i", s(&idx)]));
    for want in [
        "snapshot_period,6",
        "bidirectional,true",
        "accumulator_interval,2",
    ] {
        assert!(
            stats.contains(&want.to_string()),
            "{want} missing from {stats:?}"
        );
    }
    std::fs::write(&cfg, "[build]\nperiodd = 3\n").unwrap();
    let out = dir.path().join("other.ctix");
    let input = fixture(&dir);
    let o = ctix(&["build", "-i", s(&input), "-o", s(&out), "--config", s(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn raw_reports_are_normalized() {
    let dir = TempDir::new().unwrap();
    let raw = dir.path().join("raw.csv");
    std::fs::write(
        &raw,
        "id,timestamp,x,y\nv1,0,0,90\nv1,60,30,90\nv1,120,60,60\nv2,0,90,0\n",
    )
    .unwrap();
    let out = dir.path().join("raw.ctix");
    assert!(ctix(&["build", "-i", s(&raw), "-o", s(&out)])
        .status
        .success());
    let traj = lines(&ctix(&[
        "query",
        "-i",
        s(&out),
        "traj",
        "--id",
        "v1",
        "--from",
        "0",
        "--to",
        "2",
    ]));
    assert_eq!(traj, vec!["v1,0,0,0", "v1,0,1,1", "v1,1,2,2"]);
}

fn bench(dir: &TempDir, tag: &str) -> (Vec<Vec<String>>, Vec<Vec<String>>) {
    let out = dir.path().join(format!("{tag}.csv"));
    let pos = dir.path().join(format!("{tag}-pos.csv"));
    let o = ctix(&[
        "bench",
        "--objects",
        "80",
        "--instants",
        "720",
        "--grid",
        "128",
        "--seed",
        "3",
        "--out",
        s(&out),
        "--positions-out",
        s(&pos),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let read = |p: &Path| -> Vec<Vec<String>> {
        std::fs::read_to_string(p)
            .unwrap()
            .lines()
            .skip(1)
            .map(|l| l.split(',').map(str::to_string).collect())
            .collect()
    };
    (read(&out), read(&pos))
}

#[test]
fn bench_sweep_trends_and_determinism() {
    let dir = TempDir::new().unwrap();
    let (rows, pos) = bench(&dir, "one");
    assert_eq!(rows.len(), 4);
    let sizes: Vec<u64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(sizes.windows(2).all(|w| w[1] < w[0]), "{sizes:?}");
    let decoded: Vec<f64> = rows.iter().map(|r| r[5].parse().unwrap()).collect();
    assert!(decoded.windows(2).all(|w| w[1] > w[0]), "{decoded:?}");
    let names: Vec<&str> = pos.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(names, ["snapshot", "q1", "middle", "q3"]);
    let obj: Vec<f64> = pos.iter().map(|r| r[4].parse().unwrap()).collect();
    assert_eq!(obj[0], 0.0);
    assert!(obj.windows(2).all(|w| w[1] > w[0]), "{obj:?}");

    let (again, again_pos) = bench(&dir, "two");
    let stable = |rows: &[Vec<String>], cols: &[usize]| -> Vec<Vec<String>> {
        rows.iter()
            .map(|r| cols.iter().map(|&i| r[i].clone()).collect())
            .collect()
    };
    assert_eq!(stable(&rows, &[0, 1, 2, 5]), stable(&again, &[0, 1, 2, 5]));
    assert_eq!(
        stable(&pos, &[0, 1, 4, 5]),
        stable(&again_pos, &[0, 1, 4, 5])
    );
}
