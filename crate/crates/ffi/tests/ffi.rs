use std::ffi::{CStr, CString};
use std::process::Command;
use std::ptr;

use doc3::complexity::{erc_bound_ind, erc_bound_univ, default_gamma_grid, sigma_inf, ClassBudget, FeatureBatch};
use doc3::datasets::Dataset;
use doc3::duality::{map_to_nu, solve_oneclass_dual};
use doc3::evaluation::auc_roc;
use doc3::models::Model;
use doc3_ffi::*;
use ndarray::{array, Array2};

fn last_error() -> String {
    unsafe { CStr::from_ptr(doc3_last_error()) }.to_string_lossy().into_owned()
}

fn flat(a: &Array2<f64>) -> Vec<f64> {
    a.iter().copied().collect()
}

fn train_data() -> (Array2<f64>, Array2<f64>) {
    let x = Array2::from_shape_fn((12, 2), |(i, j)| 1.0 + 0.1 * ((i * 7 + j * 3) % 5) as f64);
    let u = Array2::from_shape_fn((8, 2), |(i, j)| if j == 1 { 5.0 + 0.2 * i as f64 } else { 0.75 });
    (x, u)
}

#[test]
fn train_score_decide_roundtrip() {
    let (x, u) = train_data();
    let (xf, uf) = (flat(&x), flat(&u));
    let mut params = doc3_train_params_default();
    params.c = 5.0;
    params.c_u = 1.0;
    params.iterations = 200;
    params.batch_train = 12;
    params.batch_univ = 8;
    let widths = [4usize, 3];
    for (objective, hidden) in [
        (DOC3_OBJECTIVE_DOC, 0),
        (DOC3_OBJECTIVE_DOC3, 0),
        (DOC3_OBJECTIVE_BINARY, 0),
        (DOC3_OBJECTIVE_DOC3, 2),
    ] {
        params.n_hidden = hidden;
        params.hidden_widths = if hidden > 0 { widths.as_ptr() } else { ptr::null() };
        let mut model = ptr::null_mut();
        let code = unsafe { doc3_train(objective, xf.as_ptr(), 12, uf.as_ptr(), 8, 2, &params, &mut model) };
        assert_eq!(code, DOC3_OK, "{}", last_error());
        assert_eq!(unsafe { doc3_model_input_dim(model) }, 2);

        let mut scores = vec![0.0; 8];
        let mut labels = vec![0i8; 8];
        let mut thr = f64::NAN;
        unsafe {
            assert_eq!(doc3_model_scores(model, uf.as_ptr(), 8, 2, scores.as_mut_ptr()), DOC3_OK);
            assert_eq!(doc3_model_decide(model, uf.as_ptr(), 8, 2, labels.as_mut_ptr()), DOC3_OK);
            assert_eq!(doc3_model_threshold(model, &mut thr), DOC3_OK);
        }
        assert_eq!(thr, if objective == DOC3_OBJECTIVE_BINARY { 0.0 } else { 1.0 });
        for (s, l) in scores.iter().zip(&labels) {
            assert_eq!(*l, if *s >= thr { 1 } else { -1 });
        }

        let dir = tempfile::tempdir().unwrap();
        let path = CString::new(dir.path().join("m.txt").to_str().unwrap()).unwrap();
        let mut loaded = ptr::null_mut();
        unsafe {
            assert_eq!(doc3_model_save(model, path.as_ptr()), DOC3_OK);
            assert_eq!(doc3_model_load(path.as_ptr(), &mut loaded), DOC3_OK);
        }
        let direct = Model::load(dir.path().join("m.txt")).unwrap().scores(&u.view()).unwrap();
        let mut again = vec![0.0; 8];
        unsafe {
            assert_eq!(doc3_model_scores(loaded, uf.as_ptr(), 8, 2, again.as_mut_ptr()), DOC3_OK);
            doc3_model_free(model);
            doc3_model_free(loaded);
        }
        assert_eq!(again, scores);
        assert_eq!(again, direct.to_vec());
    }
}

#[test]
fn errors_set_code_and_message() {
    let (x, _) = train_data();
    let xf = flat(&x);
    let params = doc3_train_params_default();
    let mut model = ptr::null_mut();
    unsafe {
        assert_eq!(
            doc3_train(DOC3_OBJECTIVE_DOC3, xf.as_ptr(), 12, ptr::null(), 0, 2, &params, &mut model),
            DOC3_ERR_NULL
        );
        assert!(model.is_null());
        assert_eq!(
            doc3_train(7, xf.as_ptr(), 12, ptr::null(), 0, 2, &params, &mut model),
            DOC3_ERR_INVALID
        );
        assert!(last_error().contains("objective"));
        let mut bad = params;
        bad.c = -1.0;
        assert_eq!(
            doc3_train(DOC3_OBJECTIVE_DOC, xf.as_ptr(), 12, ptr::null(), 0, 2, &bad, &mut model),
            DOC3_ERR_INVALID
        );
        assert!(last_error().contains("c must be positive"));

        let missing = CString::new("/definitely/missing/model.txt").unwrap();
        assert_eq!(doc3_model_load(missing.as_ptr(), &mut model), DOC3_ERR_IO);
        assert!(!last_error().is_empty());

        let mut out = 0.0;
        assert_eq!(doc3_auc([1.0].as_ptr(), 1, ptr::null(), 0, &mut out), DOC3_ERR_NULL);
        assert_eq!(doc3_auc([1.0].as_ptr(), 1, [0.0].as_ptr(), 0, &mut out), DOC3_ERR_NUMERIC);
        assert_eq!(doc3_model_threshold(ptr::null(), &mut out), DOC3_ERR_NULL);
        assert_eq!(doc3_model_input_dim(ptr::null()), 0);
        doc3_model_free(ptr::null_mut());
    }
}

#[test]
fn last_error_is_thread_local() {
    let mut out = 0.0;
    unsafe { doc3_auc(ptr::null(), 0, ptr::null(), 0, &mut out) };
    let here = last_error();
    assert!(here.contains("pos"));
    let there = std::thread::spawn(last_error).join().unwrap();
    assert!(there.is_empty());
}

#[test]
fn statistics_match_library() {
    let pos = [0.9, 0.4, 0.7, 0.7];
    let neg = [0.1, 0.7, 0.3];
    let mut auc = 0.0;
    assert_eq!(unsafe { doc3_auc(pos.as_ptr(), 4, neg.as_ptr(), 3, &mut auc) }, DOC3_OK);
    assert_eq!(auc, auc_roc(&pos, &neg).unwrap());

    let z = array![[1.0, 0.5], [0.2, -1.0], [2.0, 1.0]];
    let u = array![[1.0, 1.0], [0.5, 1.5]];
    let (zf, uf) = (flat(&z), flat(&u));
    let batch = FeatureBatch::new(z.clone(), u.clone()).unwrap();
    let mut s = 0.0;
    assert_eq!(unsafe { doc3_sigma_inf(zf.as_ptr(), 3, uf.as_ptr(), 2, 2, &mut s) }, DOC3_OK);
    assert_eq!(s, sigma_inf(&batch).unwrap());

    let mut bi = 0.0;
    assert_eq!(unsafe { doc3_erc_bound_ind(zf.as_ptr(), 3, 2, 2.0, &mut bi) }, DOC3_OK);
    assert_eq!(bi, erc_bound_ind(&z.view(), &ClassBudget::new(2.0, 0.0).unwrap()).unwrap());

    let (mut bii, mut gamma) = (0.0, -1.0);
    let code = unsafe { doc3_erc_bound_univ(zf.as_ptr(), 3, uf.as_ptr(), 2, 2, 2.0, 0.1, &mut bii, &mut gamma) };
    assert_eq!(code, DOC3_OK);
    let expected = erc_bound_univ(&batch, &ClassBudget::new(2.0, 0.1).unwrap(), &default_gamma_grid()).unwrap();
    assert_eq!((bii, gamma), expected);
    assert!(bii <= bi);

    // Single point: ŵ = z/‖z‖², ρ = 1/Σα and ν = Σα/C at large C.
    let one = [3.0, 4.0];
    let (mut nu, mut rho, mut w_hat) = (0.0, 0.0, [0.0; 2]);
    let code = unsafe { doc3_dual_to_nu(one.as_ptr(), 1, 2, 10.0, &mut nu, &mut rho, w_hat.as_mut_ptr()) };
    assert_eq!(code, DOC3_OK);
    let data = Dataset::new(array![[3.0, 4.0]]).unwrap();
    let map = map_to_nu(&solve_oneclass_dual(&data, 10.0).unwrap(), 10.0, 1).unwrap();
    assert_eq!((nu, rho), (map.nu, map.rho));
    assert_eq!(w_hat.to_vec(), map.w_hat.to_vec());
    assert!((nu - 1.0 / 250.0).abs() < 1e-12);
}

#[test]
fn header_declares_api_and_compiles() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/doc3.h");
    let text = std::fs::read_to_string(header).unwrap();
    for name in [
        "doc3_last_error",
        "doc3_model_load",
        "doc3_model_save",
        "doc3_model_free",
        "doc3_model_scores",
        "doc3_model_decide",
        "doc3_train",
        "doc3_auc",
        "doc3_sigma_inf",
        "doc3_erc_bound_ind",
        "doc3_erc_bound_univ",
        "doc3_dual_to_nu",
        "typedef struct Doc3Model Doc3Model",
    ] {
        assert!(text.contains(name), "header lacks {name}");
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("probe.c");
    std::fs::write(
        &src,
        "#include \"doc3.h\"\nint main(void) { Doc3TrainParams p = doc3_train_params_default(); return p.loss; }\n",
    )
    .unwrap();
    let status = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(concat!(env!("CARGO_MANIFEST_DIR"), "/include"))
        .arg(&src)
        .status()
        .expect("a C compiler on PATH");
    assert!(status.success());
}
