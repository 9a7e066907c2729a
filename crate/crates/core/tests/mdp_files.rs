use apprentice_core::environments::make_random_mdp;
use apprentice_core::mdp::MdpFile;
use apprentice_core::{Error, Mdp};

#[test]
fn json_round_trip() {
    let (mdp, features) = make_random_mdp(5, 3, 2, 3, 0.8, 4).unwrap();
    let file = mdp.to_file(Some(&features));
    let text = serde_json::to_string(&file).unwrap();
    let (back, f) = Mdp::from_json_str(&text).unwrap();
    assert_eq!(back, mdp);
    assert_eq!(f.unwrap(), features);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    std::fs::write(&path, &text).unwrap();
    assert_eq!(Mdp::load(&path).unwrap().0, mdp);
    assert!(matches!(Mdp::load(dir.path().join("missing.json")), Err(Error::Io(_))));
}

#[test]
fn slightly_off_rows_are_renormalised() {
    let text = r#"{"num_states":2,"num_actions":1,"gamma":0.5,"start_dist":[1.0,0.0],
        "transition":[[0.5000004,0.5],[0.0,1.0]]}"#;
    let (mdp, f) = Mdp::from_json_str(text).unwrap();
    assert!(f.is_none());
    assert!((mdp.row(0, 0).iter().sum::<f64>() - 1.0).abs() < 1e-15);

    let bad = text.replace("0.5000004", "0.6");
    assert!(Mdp::from_json_str(&bad).is_err());
    let _: MdpFile = serde_json::from_str(text).unwrap();
}
