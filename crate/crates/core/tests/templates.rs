//! Elimination templates: file validation, loading and agreement of the
//! template backend with the default solver route.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use semigen::geometry::{focal_rel_error, rotation_error_deg};
use semigen::synth::{generate_scene, minimal_sample, SceneConfig};
use semigen::template::{
    build_template, default_action_variable, fp_solution_count, load_template, parse_template, random_fp_system,
    write_template, TemplateSet, FORMAT_VERSION, TEMPLATE_DIR_ENV,
};
use semigen::{solve, Backend, Error, SolverId, SolverOptions};

fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/templates")
}

fn fixture() -> semigen::template::SolverTemplate {
    load_template(&fixture_dir().join("h51f5.json")).unwrap()
}

#[test]
fn bundled_template_loads_and_validates() {
    let t = fixture();
    assert_eq!(t.format_version, FORMAT_VERSION);
    assert_eq!(t.problem, SolverId::H51f5);
    assert_eq!(t.num_solutions, 9);
    assert_eq!(t.num_basis(), 9);
    assert_eq!(t.content_hash, t.compute_hash());
    assert_eq!(t.content_hash.len(), 64);
}

#[test]
fn tampered_templates_are_rejected() {
    let t = fixture();

    let mut edited = t.clone();
    edited.rows[0].equation = (edited.rows[0].equation + 1) % edited.equations.len();
    let err = parse_template(&serde_json::to_string(&edited).unwrap()).unwrap_err();
    assert!(matches!(&err, Error::Template(m) if m.contains("hash mismatch")), "{err}");

    let mut rehashed = t.clone();
    rehashed.num_excessive += 1;
    let rehashed = rehashed.with_hash();
    assert!(parse_template(&serde_json::to_string(&rehashed).unwrap()).is_err());

    let mut future = t.clone();
    future.format_version = FORMAT_VERSION + 1;
    let future = future.with_hash();
    let err = parse_template(&serde_json::to_string(&future).unwrap()).unwrap_err();
    assert!(err.to_string().contains("format version"));

    assert!(parse_template("{\"format_version\": 1}").is_err());
}

#[test]
fn directory_loading_reads_json_files_only_and_fails_on_bad_files() {
    let dir = tempfile::tempdir().unwrap();
    write_template(&fixture(), &dir.path().join("h51f5.json")).unwrap();
    std::fs::write(dir.path().join("notes.txt"), "not a template").unwrap();
    let set = TemplateSet::load_dir(dir.path()).unwrap();
    assert_eq!(set.len(), 1);
    assert!(set.get(SolverId::H51f5).is_some());
    assert!(set.get(SolverId::H13f).is_none());

    std::fs::write(dir.path().join("broken.json"), "{").unwrap();
    assert!(TemplateSet::load_dir(dir.path()).is_err());
    assert!(TemplateSet::load_dir(&dir.path().join("missing")).is_err());
}

#[test]
fn environment_override_takes_precedence() {
    let default = Path::new("/nonexistent/default");
    std::env::remove_var(TEMPLATE_DIR_ENV);
    assert_eq!(TemplateSet::search_dir(Some(default)), Some(default.to_path_buf()));
    assert_eq!(TemplateSet::search_dir(None), None);
    std::env::set_var(TEMPLATE_DIR_ENV, fixture_dir());
    assert_eq!(TemplateSet::search_dir(Some(default)), Some(fixture_dir()));
    std::env::remove_var(TEMPLATE_DIR_ENV);
}

#[test]
fn builder_is_deterministic_and_reproduces_the_bundled_template() {
    let t = fixture();
    let eqs = random_fp_system(SolverId::H51f5, t.metadata.instance_seed).unwrap();
    assert_eq!(fp_solution_count(&eqs), Some(9));
    let built = build_template(
        SolverId::H51f5,
        &eqs,
        default_action_variable(SolverId::H51f5),
        t.metadata.expansion_degree,
        t.metadata.instance_seed,
    )
    .unwrap()
    .with_hash();
    assert_eq!(built.size(), t.size());
    assert_eq!(built.columns, t.columns);
    assert_eq!(built.content_hash, t.content_hash);
}

#[test]
fn template_backend_agrees_with_the_default_route() {
    let mut set = TemplateSet::new();
    set.insert(fixture());
    let template_opts = SolverOptions {
        backend: Backend::Template,
        templates: Some(Arc::new(set)),
        ..SolverOptions::default()
    };
    let cfg = SceneConfig {
        seed: 5,
        ..SceneConfig::default()
    };
    let mut recovered = 0;
    for i in 0..40 {
        let scene = generate_scene(&cfg, i).unwrap();
        let sample = minimal_sample(&scene, SolverId::H51f5, false).unwrap();
        let auto = solve(SolverId::H51f5, &sample, &SolverOptions::default()).unwrap();
        let tmpl = solve(SolverId::H51f5, &sample, &template_opts).unwrap();
        assert_eq!(auto.len(), tmpl.len(), "scene {i}");
        for p in &tmpl {
            let matched = auto.iter().any(|q| {
                rotation_error_deg(&p.rotation, &q.rotation) < 1e-6 && focal_rel_error(p.focal, q.focal) < 1e-6
            });
            assert!(matched, "scene {i}: template solution missing from the default route");
        }
        if tmpl.iter().any(|p| {
            rotation_error_deg(&p.rotation, &scene.pose.rotation) < 1e-6
                && focal_rel_error(p.focal, scene.pose.focal) < 1e-6
        }) {
            recovered += 1;
        }
    }
    assert_eq!(recovered, 40);
}

#[test]
fn template_backend_without_a_template_is_an_error() {
    let scene = generate_scene(&SceneConfig::default(), 0).unwrap();
    let sample = minimal_sample(&scene, SolverId::H51f5, false).unwrap();
    let opts = SolverOptions {
        backend: Backend::Template,
        templates: Some(Arc::new(TemplateSet::new())),
        ..SolverOptions::default()
    };
    assert!(solve(SolverId::H51f5, &sample, &opts).is_err());
    assert!(solve(SolverId::H51f5, &sample, &SolverOptions::with_backend(Backend::Template)).is_err());
}
