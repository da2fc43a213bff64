use std::sync::Arc;

use pirstream::channel::{
    apply_erasures, apply_errors, gen_burst_patterns, gen_error_schedule, BurstMode, ErasureSchedule, ErrorMode,
    ErrorSchedule,
};
use pirstream::decoder::{
    check_guarantee, decode_um, decode_um_traced, recover_plain, recover_window, DecodeError, Provenance,
    RecoveringCertificate, UmDistanceProfile,
};
use pirstream::pir::{random_files, run_protocol, storage_encode, PirScheme, StorageSystem};
use pirstream::{Fe, Field, GrsCode};

fn example2(seed: u64) -> (StorageSystem, PirScheme) {
    let f = Arc::new(Field::with_order(16).unwrap());
    let code = GrsCode::reed_solomon(f.clone(), 2, (1..=6).map(Fe).collect()).unwrap();
    let sys = storage_encode(random_files(&f, 3, 4, 2, seed), &code).unwrap();
    let scheme = PirScheme::block_erasure(code, 1, 3, 4, 3, 1, vec![3, 4, 5], 1).unwrap();
    (sys, scheme)
}

fn byzantine(ell: usize, seed: u64) -> (StorageSystem, PirScheme) {
    let f = Arc::new(Field::with_order(16).unwrap());
    let code = GrsCode::reed_solomon(f.clone(), 2, (1..=10).map(Fe).collect()).unwrap();
    let sys = storage_encode(random_files(&f, 2, ell, 2, seed), &code).unwrap();
    let scheme = PirScheme::byzantine(code, 2, 2, ell, 0).unwrap();
    (sys, scheme)
}

#[test]
fn plain_recovers_random_instances() {
    let f = Arc::new(Field::with_order(16).unwrap());
    for seed in 0..40u64 {
        let k = 1 + (seed as usize % 3);
        let t = 1 + (seed as usize % 2);
        let n = 2 * k + t + (seed as usize % 4);
        let memory = seed as usize % 3;
        let (m, ell) = (1 + seed as usize % 3, 1 + seed as usize % 5);
        let code = GrsCode::reed_solomon(f.clone(), k, (1..=n as u32).map(Fe).collect()).unwrap();
        let sys = storage_encode(random_files(&f, m, ell, k, seed), &code).unwrap();
        let support: Vec<usize> = (0..n - k - t + 1).collect();
        let desired = seed as usize % m;
        let scheme = PirScheme::plain(code, t, m, ell, memory, support, desired).unwrap();
        let stream = run_protocol(&sys, &scheme, seed).unwrap();
        let rec = recover_plain(&stream, &scheme).unwrap();
        assert_eq!(rec.stripes, sys.file(desired), "seed {seed}");
    }
}

#[test]
fn plain_zero_file() {
    let f = Arc::new(Field::with_order(16).unwrap());
    let code = GrsCode::reed_solomon(f.clone(), 2, (1..=6).map(Fe).collect()).unwrap();
    let sys = storage_encode(vec![vec![vec![Fe::ZERO; 2]; 3]; 2], &code).unwrap();
    let scheme = PirScheme::plain(code, 1, 2, 3, 1, vec![0, 1, 2], 1).unwrap();
    let rec = recover_plain(&run_protocol(&sys, &scheme, 3).unwrap(), &scheme).unwrap();
    assert!(rec.stripes.iter().flatten().all(|x| x.is_zero()));
}

#[test]
fn plain_detects_tampering() {
    let (sys, scheme) = example2(1);
    let mut stream = run_protocol(&sys, &scheme, 4).unwrap();
    let f = scheme.field().clone();
    // a non-support position only carries C*D symbols; disturbing it breaks consistency
    stream.blocks[2].rounds[0][0] = f.add(stream.blocks[2].rounds[0][0], Fe::ONE);
    assert!(matches!(recover_plain(&stream, &scheme), Err(DecodeError::InconsistentBlock { block: 2 })));
}

#[test]
fn window_without_erasures_matches_plain() {
    let (sys, scheme) = example2(2);
    let stream = run_protocol(&sys, &scheme, 8).unwrap();
    let cert = RecoveringCertificate::new(&scheme).unwrap();
    let a = recover_plain(&stream, &scheme).unwrap();
    let b = recover_window(&stream, &scheme, &cert).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.stripes, sys.file(1));
}

#[test]
fn example2_second_block_erased() {
    let (sys, scheme) = example2(3);
    let stream = run_protocol(&sys, &scheme, 9).unwrap();
    let cert = RecoveringCertificate::new(&scheme).unwrap();
    let lossy = apply_erasures(&stream, &ErasureSchedule::new([1]));
    let rec = recover_window(&lossy, &scheme, &cert).unwrap();
    assert_eq!(rec.stripes, sys.file(1));
    assert_eq!(rec.provenance[0], Provenance::Direct);
    assert_eq!(rec.provenance[1], Provenance::WindowSolved);
}

#[test]
fn example2_every_single_burst() {
    for seed in 0..5 {
        let (sys, scheme) = example2(seed);
        let stream = run_protocol(&sys, &scheme, seed).unwrap();
        let cert = RecoveringCertificate::new(&scheme).unwrap();
        for mode in [BurstMode::Exhaustive, BurstMode::ShiftedFamily, BurstMode::AllAdmissible] {
            for pattern in gen_burst_patterns(4, 1, 3, 1, mode).unwrap() {
                let rec = recover_window(&apply_erasures(&stream, &pattern), &scheme, &cert).unwrap();
                assert_eq!(rec.stripes, sys.file(1), "{pattern:?}");
            }
        }
    }
}

#[test]
fn window_rejects_long_burst() {
    let (sys, scheme) = example2(4);
    let stream = run_protocol(&sys, &scheme, 1).unwrap();
    let cert = RecoveringCertificate::new(&scheme).unwrap();
    let lossy = apply_erasures(&stream, &ErasureSchedule::new([1, 2]));
    assert!(matches!(recover_window(&lossy, &scheme, &cert), Err(DecodeError::UncorrectablePattern(_))));
}

#[test]
fn window_larger_memory() {
    // k=2, eps=2, N=5 needs |J| >= ceil(10/3) = 4
    let f = Arc::new(Field::with_order(64).unwrap());
    let code = GrsCode::reed_solomon(f.clone(), 2, (1..=12).map(Fe).collect()).unwrap();
    let sys = storage_encode(random_files(&f, 2, 7, 2, 5), &code).unwrap();
    let scheme = PirScheme::block_erasure(code, 2, 2, 7, 5, 2, vec![4, 5, 6, 7, 8], 0).unwrap();
    let cert = RecoveringCertificate::new(&scheme).unwrap();
    let stream = run_protocol(&sys, &scheme, 5).unwrap();
    for pattern in gen_burst_patterns(7, 2, 5, 2, BurstMode::AllAdmissible).unwrap() {
        let rec = recover_window(&apply_erasures(&stream, &pattern), &scheme, &cert).unwrap();
        assert_eq!(rec.stripes, sys.file(0), "{pattern:?}");
    }
}

#[test]
fn um_clean_stream_is_anchored() {
    let (sys, scheme) = byzantine(5, 1);
    let stream = run_protocol(&sys, &scheme, 2).unwrap();
    let (rec, trace) = decode_um_traced(&stream, &scheme).unwrap();
    assert_eq!(rec.stripes, sys.file(0));
    assert!(rec.provenance.iter().all(|&p| p == Provenance::Direct));
    assert_eq!(trace.len(), 6);
    assert!(trace.iter().all(|l| l.metric == 0));
}

fn errors_at(blocks: usize, at: &[(usize, &[usize])]) -> ErrorSchedule {
    let mut s = ErrorSchedule { blocks: vec![Vec::new(); blocks], ..Default::default() };
    for (b, servers) in at {
        s.blocks[*b] = servers.to_vec();
    }
    s
}

#[test]
fn um_single_and_double_errors() {
    let (sys, scheme) = byzantine(4, 7);
    let stream = run_protocol(&sys, &scheme, 3).unwrap();
    let f = scheme.field().clone();
    for (b, servers) in [(2usize, &[4usize][..]), (1, &[0, 9][..]), (0, &[1, 2, 3, 4, 5][..])] {
        let sched = errors_at(5, &[(b, servers)]);
        let noisy = apply_errors(&f, &stream, &sched, 11);
        let (rec, trace) = decode_um_traced(&noisy, &scheme).unwrap();
        assert_eq!(rec.stripes, sys.file(0), "block {b}");
        assert_eq!(trace[b].metric, servers.len());
    }
}

#[test]
fn um_budget_schedules() {
    let profile = UmDistanceProfile::byzantine(10, 2, 2);
    for seed in 0..150u64 {
        let (sys, scheme) = byzantine(5, seed);
        let stream = run_protocol(&sys, &scheme, seed).unwrap();
        let sched = gen_error_schedule(&profile, 10, 6, &ErrorMode::Budget, seed).unwrap();
        assert!(check_guarantee(&sched.weights(), &profile));
        let noisy = apply_errors(scheme.field(), &stream, &sched, seed);
        let rec = decode_um(&noisy, &scheme).unwrap_or_else(|e| panic!("seed {seed} {:?}: {e}", sched.weights()));
        assert_eq!(rec.stripes, sys.file(0), "seed {seed} {:?}", sched.weights());
    }
}

#[test]
fn um_fixed_byzantine_server() {
    let profile = UmDistanceProfile::byzantine(10, 2, 2);
    for seed in 0..20u64 {
        let (sys, scheme) = byzantine(6, seed);
        let stream = run_protocol(&sys, &scheme, seed).unwrap();
        let sched = gen_error_schedule(&profile, 10, 7, &ErrorMode::ByzantineFixed { b: 1 }, seed).unwrap();
        let noisy = apply_errors(scheme.field(), &stream, &sched, seed);
        assert_eq!(decode_um(&noisy, &scheme).unwrap().stripes, sys.file(0));
    }
}

#[test]
fn um_heavy_noise_fails_or_differs() {
    let profile = UmDistanceProfile::byzantine(10, 2, 2);
    let (sys, scheme) = byzantine(4, 3);
    let stream = run_protocol(&sys, &scheme, 3).unwrap();
    let sched = gen_error_schedule(&profile, 10, 5, &ErrorMode::Adversarial { weight: 8 }, 3).unwrap();
    assert!(!check_guarantee(&sched.weights(), &profile));
    let noisy = apply_errors(scheme.field(), &stream, &sched, 3);
    match decode_um(&noisy, &scheme) {
        Ok(rec) => assert_ne!(rec.stripes, sys.file(0)),
        Err(e) => assert!(matches!(e, DecodeError::DecodingFailure(_))),
    }
}

#[test]
fn um_single_erased_block() {
    let (sys, scheme) = byzantine(5, 9);
    let stream = run_protocol(&sys, &scheme, 9).unwrap();
    let lossy = apply_erasures(&stream, &ErasureSchedule::new([2]));
    let sched = errors_at(6, &[(4, &[3])]);
    let noisy = apply_errors(scheme.field(), &lossy, &sched, 1);
    assert_eq!(decode_um(&noisy, &scheme).unwrap().stripes, sys.file(0));
}

#[test]
fn decoders_reject_wrong_variant() {
    let (sys, scheme) = example2(0);
    let stream = run_protocol(&sys, &scheme, 0).unwrap();
    assert!(matches!(decode_um(&stream, &scheme), Err(DecodeError::WrongVariant(_))));
    let (bsys, bscheme) = byzantine(3, 0);
    let bstream = run_protocol(&bsys, &bscheme, 0).unwrap();
    assert!(matches!(recover_plain(&bstream, &bscheme), Err(DecodeError::WrongVariant(_))));
}
