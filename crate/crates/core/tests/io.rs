use std::path::Path;

use piso_core::cases::{presets, run_case, MeshSpec};
use piso_core::error::Error;
use piso_core::io::{parse_config, print_config, read_fields, write_atomic, write_fields, FieldData, FieldDump, MAGIC};
use piso_core::piso::Precision;

fn config_file(name: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn config_error(text: &str) -> (usize, usize, String) {
    match parse_config(text, "t.cfg") {
        Err(Error::Config { line, column, message, .. }) => (line, column, message),
        other => panic!("expected a located config error, got {other:?}"),
    }
}

#[test]
fn shipped_configs_round_trip() {
    for name in ["cavity.cfg", "channel.cfg", "poiseuille.cfg", "scaling.cfg"] {
        let parsed = parse_config(&config_file(name), name).unwrap();
        let printed = print_config(&parsed);
        let reparsed = parse_config(&printed, "printed").unwrap();
        assert_eq!(reparsed, parsed, "{name}");
        assert_eq!(print_config(&reparsed), printed, "{name}: printing is not a fixed point");
    }
}

#[test]
fn presets_round_trip() {
    for c in [
        presets::cavity_case(16, 100.0, 2.0),
        presets::poiseuille_case(8, 0.3, 1.0, 1.0),
        presets::channel_case([8, 8, 4], 550.0, 5, 7),
        presets::lid_task(),
        presets::joint_task(1e-3),
        presets::scaling_task([18, 16], 10, 0.01, piso_core::adjoint::GradientPath::POnly),
    ] {
        assert_eq!(parse_config(&print_config(&c), "preset").unwrap(), c, "{}", c.name);
    }
}

#[test]
fn omitted_keys_take_defaults() {
    let c = parse_config("[mesh]\nkind = cavity\nn = 4\n[fluid]\nviscosity = 0.1\n[time]\ndt = 0.1\nsteps = 2\n", "t").unwrap();
    assert_eq!(c.solver.correctors, 2);
    assert_eq!(c.solver.non_orthogonal_correctors, None);
    assert_eq!(c.precision, Precision::Double);
    assert_eq!(c.step_config().tolerance(), 1e-8);
    assert_eq!(c.name, "case");
}

#[test]
fn channel_refinement_is_read() {
    let c = parse_config(&config_file("channel.cfg"), "channel.cfg").unwrap();
    match c.mesh {
        MeshSpec::Channel { base, resolution, .. } => {
            assert_eq!(base, 1.095);
            assert_eq!(resolution, [16, 16, 8]);
        }
        other => panic!("unexpected mesh {other:?}"),
    }
}

#[test]
fn errors_carry_line_and_column() {
    let (line, col, msg) = config_error("[mesh]\nkind = cavity\n  nn = 4\n");
    assert_eq!((line, col), (3, 3));
    assert!(msg.contains("nn"), "{msg}");
    let (line, _, msg) = config_error("[mesh]\nkind = cavity\nn = 4\nn = 5\n");
    assert_eq!(line, 4);
    assert!(msg.contains("duplicate"), "{msg}");
    let (line, _, _) = config_error("[mesh]\nkind = cavity\nn = four\n");
    assert_eq!(line, 3);
    let (line, _, _) = config_error("[meshes]\n");
    assert_eq!(line, 1);
    let rendered = parse_config("[mesh]\nkind = cavity\n  nn = 4\n", "t.cfg").unwrap_err().to_string();
    assert!(rendered.starts_with("t.cfg:3:3:"), "{rendered}");
}

#[test]
fn dumps_round_trip_in_both_precisions() {
    let out = run_case(&presets::cavity_case(8, 100.0, 0.2)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    for precision in [Precision::Double, Precision::Single] {
        let dump = FieldDump::from_state(&out.domain, &out.state, precision).unwrap();
        let path = dir.path().join(format!("f_{}.bin", precision.name()));
        write_fields(&path, &dump).unwrap();
        let back = read_fields(&path).unwrap();
        assert_eq!(back, dump);
        assert_eq!(back.precision(), Some(precision));
        let (u, p) = back.to_fields(&out.domain).unwrap();
        for c in 0..out.domain.n_cells() {
            let stored = |x: f64| if precision == Precision::Single { x as f32 as f64 } else { x };
            for (got, want) in u[c].iter().zip(&out.state.velocity[c]).take(2) {
                assert_eq!(*got, stored(*want));
            }
            assert_eq!(p[c], stored(out.state.pressure[c]));
        }
    }
}

#[test]
fn corrupt_dumps_are_rejected() {
    let out = run_case(&presets::closed_box_case(3, 1)).unwrap();
    let bytes = FieldDump::from_state(&out.domain, &out.state, Precision::Double).unwrap().to_bytes().unwrap();
    assert_eq!(&bytes[..8], &MAGIC);
    assert!(FieldDump::from_bytes(&bytes).is_ok());

    let dump_err = |b: &[u8]| match FieldDump::from_bytes(b) {
        Err(Error::Dump(m)) => m,
        other => panic!("expected a dump error, got {other:?}"),
    };
    assert!(dump_err(&bytes[..bytes.len() - 3]).contains("truncated"));
    let mut flipped = bytes.clone();
    flipped[40] ^= 1;
    assert!(dump_err(&flipped).contains("checksum"));
    let mut version = bytes.clone();
    version[8] = 9;
    assert!(dump_err(&version).contains("version"));
    let mut trailing = bytes.clone();
    trailing.push(0);
    assert!(dump_err(&trailing).contains("trailing"));
    let mut magic = bytes;
    magic[0] = b'X';
    assert!(dump_err(&magic).contains("magic"));

    let empty = FieldDump { time: 0.0, blocks: vec![] };
    assert!(empty.to_bytes().is_err());
    let other = run_case(&presets::closed_box_case(4, 1)).unwrap();
    let d3 = FieldDump::from_state(&out.domain, &out.state, Precision::Double).unwrap();
    assert!(d3.to_fields(&other.domain).is_err());
    assert!(matches!(d3.blocks[0].data, FieldData::Double(_)));
}

#[test]
fn atomic_write_replaces_whole_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.txt");
    write_atomic(&path, b"first version, longer").unwrap();
    write_atomic(&path, b"second").unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), b"second");
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1, "no temporary files left behind");
    assert!(write_atomic(&dir.path().join("missing/out.txt"), b"x").is_err());
}
