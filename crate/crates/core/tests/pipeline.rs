use std::collections::BTreeSet;

use overlapscope::dataset::{
    balance, compose_overlap_dataset, load_external, render_groups, singles_from_frames, split_by_group, write_split,
};
use overlapscope::phantom::PhantomSpec;
use overlapscope::{Label, PatchGrid, SensorModel, Split};

#[test]
fn default_phantoms_are_sparse() {
    let frames = render_groups(&PhantomSpec::default(), &[0, 1, 2], 5).unwrap();
    let singles = singles_from_frames(&frames, &PatchGrid::new(96, 1.0 / 3.0, 32)).unwrap();
    let pos = singles.iter().filter(|p| p.label.is_positive()).count();
    assert!(pos > 0);
    assert!((pos as f64) / (singles.len() as f64) < 0.5, "{pos} of {}", singles.len());
}

#[test]
fn phantom_to_disk_and_back() {
    let template = PhantomSpec { frame_size: 256, sparsity_patch: 32, ..PhantomSpec::default() };
    let groups: Vec<u32> = (0..8).collect();
    let frames = render_groups(&template, &groups, 11).unwrap();
    let singles = singles_from_frames(&frames, &PatchGrid::new(32, 1.0 / 3.0, 16)).unwrap();
    let balanced = balance(singles, (1, 3), 2).unwrap();
    let pos = balanced.iter().filter(|p| p.label.is_positive()).count();
    assert_eq!(balanced.len() - pos, 3 * pos);

    let parts = split_by_group(balanced, [0.5, 0.25, 0.25], 4).unwrap();
    let ids = |s: Split| parts.get(s).iter().map(|p| p.source.group_id).collect::<BTreeSet<_>>();
    let (tr, va, te) = (ids(Split::Train), ids(Split::Val), ids(Split::Test));
    assert!(tr.is_disjoint(&va) && tr.is_disjoint(&te) && va.is_disjoint(&te));
    assert_eq!(tr.len() + va.len() + te.len(), 8);

    let sensor = SensorModel::prototype();
    let composed = compose_overlap_dataset(&parts.train, 3, 10, &sensor, 6).unwrap();
    assert_eq!(composed.len(), 20);
    for p in &composed {
        assert_eq!(p.contributors.len(), 3);
        let or = p.contributors.iter().any(|c| c.label.is_positive());
        assert_eq!(p.label.is_positive(), or);
        assert!(p.contributors.iter().all(|c| tr.contains(&c.source.group_id)));
    }
    assert_eq!(composed, compose_overlap_dataset(&parts.train, 3, 10, &sensor, 6).unwrap());

    let dir = tempfile::tempdir().unwrap();
    let manifest = write_split(dir.path(), Split::Train, &composed, 1.0 / 3.0, Some(3), 6).unwrap();
    let back = load_external(&manifest).unwrap();
    assert_eq!(back.len(), composed.len());
    for (a, b) in composed.iter().zip(&back) {
        assert_eq!(a.pixels, b.pixels);
        assert_eq!(a.label, b.label);
        assert_eq!(a.contributors, b.contributors);
    }
    assert_eq!(back.iter().filter(|p| p.label == Label::Positive).count(), 10);
}
