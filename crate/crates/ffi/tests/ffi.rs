use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use evoplast::snn::NamedRule;
use evoplast_ffi::*;

fn named(name: &str) -> *mut EvoplastGenome {
    let name = CString::new(name).unwrap();
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { evoplast_genome_named(name.as_ptr(), &mut g) }, EvoplastStatus::Ok);
    g
}

fn take_string(p: *mut std::ffi::c_char) -> String {
    let s = unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string();
    unsafe { evoplast_string_free(p) };
    s
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(evoplast_last_error()) }.to_str().unwrap().to_string()
}

#[test]
fn named_genomes_print_and_evaluate() {
    for (name, text) in [("mstdpet", "E*R"), ("cartpole_best", "t*R*E*w0*w0")] {
        let g = named(name);
        let mut s = ptr::null_mut();
        assert_eq!(unsafe { evoplast_genome_expression(g, &mut s) }, EvoplastStatus::Ok);
        assert_eq!(take_string(s), text);
        unsafe { evoplast_genome_free(g) };
    }
    let g = named("mstdpet");
    assert_eq!(unsafe { evoplast_genome_n_inputs(g) }, 8);
    let xs = [2.0, 3.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
    let mut y = 0.0;
    assert_eq!(unsafe { evoplast_genome_evaluate(g, xs.as_ptr(), 8, &mut y) }, EvoplastStatus::Ok);
    assert_eq!(y, 6.0);
    assert_eq!(
        unsafe { evoplast_genome_evaluate(g, xs.as_ptr(), 3, &mut y) },
        EvoplastStatus::InvalidGenome
    );
    assert!(last_error().contains('8'), "{}", last_error());
    unsafe { evoplast_genome_free(g) };
}

#[test]
fn json_round_trip_through_handles() {
    let g = named("xor_best");
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { evoplast_genome_to_json(g, &mut s) }, EvoplastStatus::Ok);
    let json = take_string(s);
    assert_eq!(serde_json::from_str::<evoplast::expr_graph::Genome>(&json).unwrap(), NamedRule::XorBest.genome());
    let c = CString::new(json).unwrap();
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { evoplast_genome_from_json(c.as_ptr(), &mut h) }, EvoplastStatus::Ok);
    unsafe {
        evoplast_genome_free(h);
        evoplast_genome_free(g);
    }
}

#[test]
fn errors_are_reported() {
    let bad = CString::new("{\"n_inputs\": 8}").unwrap();
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { evoplast_genome_from_json(bad.as_ptr(), &mut h) }, EvoplastStatus::InvalidGenome);
    assert!(h.is_null());
    assert!(!last_error().is_empty());
    let name = CString::new("hebb").unwrap();
    assert_eq!(unsafe { evoplast_genome_named(name.as_ptr(), &mut h) }, EvoplastStatus::UnknownRule);
    assert!(last_error().contains("cartpole_best"));
    assert_eq!(unsafe { evoplast_genome_named(ptr::null(), &mut h) }, EvoplastStatus::NullPointer);
    let mut y = 0.0;
    assert_eq!(
        unsafe { evoplast_genome_evaluate(ptr::null(), ptr::null(), 0, &mut y) },
        EvoplastStatus::NullPointer
    );
    unsafe {
        evoplast_genome_free(ptr::null_mut());
        evoplast_string_free(ptr::null_mut());
        evoplast_cartpole_free(ptr::null_mut());
    }
}

#[test]
fn fitness_matches_library() {
    let g = named("cartpole_best");
    let seeds = [1u64, 2, 3];
    let mut f = 0.0;
    assert_eq!(unsafe { evoplast_cartpole_fitness(g, seeds.as_ptr(), 3, &mut f) }, EvoplastStatus::Ok);
    let task = evoplast::evolution::Task::Cartpole(Default::default());
    assert_eq!(f, task.genome_fitness(&NamedRule::CartpoleBest.genome(), &seeds).unwrap());
    assert!((1.0..=100.0).contains(&f));
    assert_eq!(unsafe { evoplast_cartpole_fitness(g, seeds.as_ptr(), 2, &mut f) }, EvoplastStatus::Config);
    assert_eq!(unsafe { evoplast_xor_fitness(g, seeds.as_ptr(), 3, &mut f) }, EvoplastStatus::InvalidGenome);
    unsafe { evoplast_genome_free(g) };
}

#[test]
fn cartpole_env_follows_library_dynamics() {
    let env = evoplast_cartpole_new(5);
    let mut s = EvoplastCartPoleState::default();
    assert_eq!(unsafe { evoplast_cartpole_state(env, &mut s) }, EvoplastStatus::Ok);
    for v in [s.x, s.x_dot, s.theta, s.theta_dot] {
        assert!((-0.05..=0.05).contains(&v));
    }
    let p = evoplast::env_cartpole::CartPoleParams::default();
    let mut lib_state = evoplast::env_cartpole::CartPoleState {
        x: s.x,
        x_dot: s.x_dot,
        theta: s.theta,
        theta_dot: s.theta_dot,
    };
    let mut done = false;
    let mut n = 0;
    while !done {
        let a = if n % 3 == 0 { EVOPLAST_ACTION_LEFT } else { EVOPLAST_ACTION_RIGHT };
        assert_eq!(unsafe { evoplast_cartpole_step(env, a, &mut s, &mut done) }, EvoplastStatus::Ok);
        let action = if a == EVOPLAST_ACTION_LEFT {
            evoplast::env_cartpole::Action::Left
        } else {
            evoplast::env_cartpole::Action::Right
        };
        lib_state = evoplast::env_cartpole::step(lib_state, action, &p).0;
        assert_eq!((s.x, s.x_dot, s.theta, s.theta_dot), (lib_state.x, lib_state.x_dot, lib_state.theta, lib_state.theta_dot));
        n += 1;
    }
    assert!(n <= 100);
    assert_eq!(unsafe { evoplast_cartpole_step(env, 7, &mut s, &mut done) }, EvoplastStatus::InvalidArgument);
    assert_eq!(unsafe { evoplast_cartpole_reset(env, &mut s) }, EvoplastStatus::Ok);
    unsafe { evoplast_cartpole_free(env) };
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/evoplast.h")).unwrap();
    let src = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("src/lib.rs")).unwrap();
    let exports: Vec<&str> = src
        .split("extern \"C\" fn ")
        .skip(1)
        .map(|s| s.split('(').next().unwrap())
        .collect();
    assert!(exports.len() >= 15);
    for f in exports {
        assert!(header.contains(&format!("{f}(")), "{f} missing from header");
    }
}

/// Directory holding the built static library (`target/<profile>`).
fn artifact_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn c_program_links_against_static_library() {
    let lib = artifact_dir().join("libevoplast_ffi.a");
    if !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: static library or C compiler unavailable");
        return;
    }
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let out = std::env::temp_dir().join(format!("evoplast_smoke_{}", std::process::id()));
    let status = Command::new("cc")
        .arg("-std=c99")
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(manifest.join("tests/c/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let run = Command::new(&out).output().unwrap();
    let _ = std::fs::remove_file(&out);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stdout));
    assert!(String::from_utf8_lossy(&run.stdout).contains("E*(S_j + R) + S_j"));
}
