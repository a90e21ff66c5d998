//! Coordinator/worker runs over loopback TCP, including message accounting,
//! input verification, fault injection, and protocol violations.

use std::fs::File;
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::time::Duration;

use blockfft::block::{merge_parts, BlockManifest, MergeOptions, SampleFormat};
use blockfft::engine::{process_block, run_local, BlockContext, BlockStatus, JobConfig, Kernel};
use blockfft::fft::FftPlan;
use blockfft::net::{
    read_message, worker_run, write_message, Coordinator, CoordinatorConfig, Message, NetError,
    ProtocolError, WorkerConfig,
};
use blockfft::signal::{generate_file, Signal};

fn make_input(dir: &Path, blocks: u64, records_per_block: u64, fft_size: usize, seed: u64) -> (PathBuf, BlockManifest) {
    let input = dir.join("input.bin");
    let samples = blocks * records_per_block * fft_size as u64;
    generate_file(&input, samples, SampleFormat::ComplexF32, Signal::Random { seed }, fft_size)
        .unwrap();
    let block_size = records_per_block * SampleFormat::ComplexF32.record_input_bytes(fft_size);
    let manifest =
        BlockManifest::for_file(&input, block_size, fft_size, SampleFormat::ComplexF32).unwrap();
    assert_eq!(manifest.blocks.len() as u64, blocks);
    (input, manifest)
}

fn local_reference(dir: &Path, input: &Path, manifest: &BlockManifest, kernel: Kernel) -> Vec<u8> {
    let parts = dir.join("local-parts");
    let result = run_local(&JobConfig::new(manifest.clone(), input, &parts, kernel)).unwrap();
    assert!(result.success());
    let merged = dir.join("local.bin");
    merge_parts(&parts, manifest, &merged, MergeOptions::default()).unwrap();
    std::fs::read(&merged).unwrap()
}

#[test]
fn single_worker_sees_one_assign_per_block_then_shutdown() {
    let dir = tempfile::tempdir().unwrap();
    let (input, manifest) = make_input(dir.path(), 4, 8, 128, 11);
    let out = dir.path().join("parts");
    std::fs::create_dir_all(&out).unwrap();

    let coordinator = Coordinator::bind("127.0.0.1:0").unwrap();
    let addr = coordinator.local_addr();
    let config = CoordinatorConfig::new(Kernel::FftForward);
    let serve = std::thread::spawn(move || coordinator.serve(&manifest, &config));

    // Hand-rolled worker speaking the wire protocol directly.
    let mut stream = TcpStream::connect(addr).unwrap();
    write_message(
        &mut stream,
        &Message::Hello {
            worker_id: "raw".into(),
            cores: 1,
        },
    )
    .unwrap();

    let mut file = File::open(&input).unwrap();
    let mut assigns = 0u64;
    loop {
        match read_message(&mut stream).unwrap() {
            Message::Assign(a) => {
                assigns += 1;
                let plan = FftPlan::new(
                    a.fft_size as usize,
                    a.descriptor.record_count as usize,
                    a.kernel.direction().unwrap(),
                )
                .unwrap();
                let ctx = BlockContext {
                    input_path: &input,
                    output_dir: &out,
                    sample_format: a.sample_format,
                    fft_size: a.fft_size as usize,
                    kernel: a.kernel,
                    plan: Some(&plan),
                };
                let (part, timing) =
                    process_block(&mut file, &a.descriptor, a.input_crc, &ctx).unwrap();
                write_message(
                    &mut stream,
                    &Message::BlockDone {
                        block_index: a.descriptor.block_index,
                        output_crc: part.crc64,
                        read_ns: timing.read_ns,
                        compute_ns: timing.compute_ns,
                        write_ns: timing.write_ns,
                    },
                )
                .unwrap();
            }
            Message::Shutdown => break,
            other => panic!("unexpected message {other:?}"),
        }
    }
    assert_eq!(assigns, 4, "one assign per block");

    let result = serve.join().unwrap().unwrap();
    assert!(result.success());
    assert_eq!(result.worker_count, 1);
    assert_eq!(result.timings.per_block.len(), 4);
}

#[test]
fn two_workers_match_the_local_run_bit_for_bit() {
    let dir = tempfile::tempdir().unwrap();
    let (input, manifest) = make_input(dir.path(), 16, 8, 256, 21);
    let reference = local_reference(dir.path(), &input, &manifest, Kernel::FftForward);

    let shared_out = dir.path().join("dist-parts");
    let coordinator = Coordinator::bind("127.0.0.1:0").unwrap();
    let addr = coordinator.local_addr();
    let manifest_for_serve = manifest.clone();
    let config = CoordinatorConfig::new(Kernel::FftForward);
    let serve = std::thread::spawn(move || coordinator.serve(&manifest_for_serve, &config));

    let mut workers = Vec::new();
    for i in 0..2 {
        let mut wc = WorkerConfig::new(addr.to_string(), &input, &shared_out);
        wc.cores = 1;
        wc.worker_id = format!("w{i}");
        workers.push(std::thread::spawn(move || worker_run(&wc)));
    }
    let result = serve.join().unwrap().unwrap();
    assert!(result.success());
    assert_eq!(result.worker_count, 2);

    let mut done = 0;
    for w in workers {
        let summary = w.join().unwrap().unwrap();
        done += summary.blocks_done;
    }
    assert_eq!(done, 16);

    let merged = dir.path().join("dist.bin");
    merge_parts(&shared_out, &manifest, &merged, MergeOptions::default()).unwrap();
    assert_eq!(std::fs::read(&merged).unwrap(), reference);

    // Same local result fingerprint, too.
    let local = run_local(&JobConfig::new(
        manifest.clone(),
        &input,
        dir.path().join("local2"),
        Kernel::FftForward,
    ))
    .unwrap();
    assert_eq!(result.output_checksum, local.output_checksum);
}

#[test]
fn worker_killed_mid_job_gets_its_blocks_reassigned() {
    let dir = tempfile::tempdir().unwrap();
    let (input, manifest) = make_input(dir.path(), 16, 4, 256, 31);
    let reference = local_reference(dir.path(), &input, &manifest, Kernel::FftForward);

    let shared_out = dir.path().join("dist-parts");
    std::fs::create_dir_all(&shared_out).unwrap();
    let coordinator = Coordinator::bind("127.0.0.1:0").unwrap();
    let addr = coordinator.local_addr();
    let manifest_for_serve = manifest.clone();
    let config = CoordinatorConfig::new(Kernel::FftForward);
    let serve = std::thread::spawn(move || coordinator.serve(&manifest_for_serve, &config));

    // Flaky worker: completes two blocks, then vanishes without a word.
    let flaky_input = input.clone();
    let flaky_out = shared_out.clone();
    let flaky = std::thread::spawn(move || {
        let mut stream = TcpStream::connect(addr).unwrap();
        write_message(
            &mut stream,
            &Message::Hello {
                worker_id: "flaky".into(),
                cores: 1,
            },
        )
        .unwrap();
        let mut file = File::open(&flaky_input).unwrap();
        for _ in 0..2 {
            match read_message(&mut stream).unwrap() {
                Message::Assign(a) => {
                    let plan = FftPlan::new(
                        a.fft_size as usize,
                        a.descriptor.record_count as usize,
                        a.kernel.direction().unwrap(),
                    )
                    .unwrap();
                    let ctx = BlockContext {
                        input_path: &flaky_input,
                        output_dir: &flaky_out,
                        sample_format: a.sample_format,
                        fft_size: a.fft_size as usize,
                        kernel: a.kernel,
                        plan: Some(&plan),
                    };
                    let (part, timing) =
                        process_block(&mut file, &a.descriptor, a.input_crc, &ctx).unwrap();
                    write_message(
                        &mut stream,
                        &Message::BlockDone {
                            block_index: a.descriptor.block_index,
                            output_crc: part.crc64,
                            read_ns: timing.read_ns,
                            compute_ns: timing.compute_ns,
                            write_ns: timing.write_ns,
                        },
                    )
                    .unwrap();
                }
                other => panic!("unexpected message {other:?}"),
            }
        }
        // Killed: socket dropped with blocks still pending.
        drop(stream);
    });
    flaky.join().unwrap();

    // Replacement worker connects after the kill and finishes the job.
    let mut wc = WorkerConfig::new(addr.to_string(), &input, &shared_out);
    wc.cores = 2;
    wc.worker_id = "replacement".into();
    let summary = worker_run(&wc).unwrap();
    assert_eq!(summary.blocks_done, 14);

    let result = serve.join().unwrap().unwrap();
    assert!(result.success());
    assert_eq!(result.timings.per_block.len(), 16);

    let merged = dir.path().join("dist.bin");
    merge_parts(&shared_out, &manifest, &merged, MergeOptions::default()).unwrap();
    assert_eq!(std::fs::read(&merged).unwrap(), reference);
}

#[test]
fn worker_with_wrong_input_fails_every_block_as_input_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let (input, manifest) = make_input(dir.path(), 4, 4, 256, 41);

    // Same size, different bytes: every per-block CRC check must fail.
    let wrong = dir.path().join("wrong.bin");
    generate_file(
        &wrong,
        manifest.input_file_size / 8,
        SampleFormat::ComplexF32,
        Signal::Random { seed: 999 },
        256,
    )
    .unwrap();
    assert_ne!(std::fs::read(&input).unwrap(), std::fs::read(&wrong).unwrap());

    let coordinator = Coordinator::bind("127.0.0.1:0").unwrap();
    let addr = coordinator.local_addr();
    let config = CoordinatorConfig::new(Kernel::FftForward);
    let manifest_for_serve = manifest.clone();
    let serve = std::thread::spawn(move || coordinator.serve(&manifest_for_serve, &config));

    let mut wc = WorkerConfig::new(addr.to_string(), &wrong, dir.path().join("parts"));
    wc.worker_id = "stale".into();
    let summary = worker_run(&wc).unwrap();
    assert_eq!(summary.blocks_done, 0);
    assert_eq!(summary.blocks_failed, 4);

    let result = serve.join().unwrap().unwrap();
    assert!(!result.success());
    assert_eq!(result.failed_blocks().len(), 4);
    for status in &result.block_statuses {
        match status {
            BlockStatus::Failed { reason } => {
                assert!(reason.starts_with("input mismatch"), "reason: {reason}")
            }
            BlockStatus::Done => panic!("no block should have completed"),
        }
    }
}

#[test]
fn duplicate_block_done_closes_the_offending_connection() {
    let dir = tempfile::tempdir().unwrap();
    let (input, manifest) = make_input(dir.path(), 4, 4, 128, 51);
    let out = dir.path().join("parts");
    std::fs::create_dir_all(&out).unwrap();

    let coordinator = Coordinator::bind("127.0.0.1:0").unwrap();
    let addr = coordinator.local_addr();
    let config = CoordinatorConfig::new(Kernel::Identity);
    let manifest_for_serve = manifest.clone();
    let serve = std::thread::spawn(move || coordinator.serve(&manifest_for_serve, &config));

    // Misbehaving client reports the same completion twice.
    let mut stream = TcpStream::connect(addr).unwrap();
    write_message(
        &mut stream,
        &Message::Hello {
            worker_id: "dup".into(),
            cores: 1,
        },
    )
    .unwrap();
    let assignment = match read_message(&mut stream).unwrap() {
        Message::Assign(a) => a,
        other => panic!("expected Assign, got {other:?}"),
    };
    let mut file = File::open(&input).unwrap();
    let ctx = BlockContext {
        input_path: &input,
        output_dir: &out,
        sample_format: assignment.sample_format,
        fft_size: assignment.fft_size as usize,
        kernel: assignment.kernel,
        plan: None,
    };
    let (part, timing) =
        process_block(&mut file, &assignment.descriptor, assignment.input_crc, &ctx).unwrap();
    let done = Message::BlockDone {
        block_index: assignment.descriptor.block_index,
        output_crc: part.crc64,
        read_ns: timing.read_ns,
        compute_ns: timing.compute_ns,
        write_ns: timing.write_ns,
    };
    write_message(&mut stream, &done).unwrap();
    write_message(&mut stream, &done).unwrap();

    // The coordinator must close this connection as a protocol error.
    let mut saw_close = false;
    for _ in 0..200 {
        match read_message(&mut stream) {
            Err(ProtocolError::Closed) | Err(ProtocolError::Io(_)) => {
                saw_close = true;
                break;
            }
            Ok(Message::Assign(_)) => continue, // ignore; we are being fired
            Ok(other) => panic!("unexpected message {other:?}"),
            Err(ProtocolError::Truncated { .. }) => {
                saw_close = true;
                break;
            }
            Err(e) => panic!("unexpected protocol error {e}"),
        }
    }
    assert!(saw_close, "connection should be closed after the duplicate");

    // A healthy worker still finishes the job.
    let mut wc = WorkerConfig::new(addr.to_string(), &input, &out);
    wc.worker_id = "healthy".into();
    worker_run(&wc).unwrap();
    let result = serve.join().unwrap().unwrap();
    assert!(result.success());
}

/// Raw client that does up to `quota` blocks, then drops the socket.
fn short_lived_worker(addr: std::net::SocketAddr, input: PathBuf, out: PathBuf, quota: usize) {
    let Ok(mut stream) = TcpStream::connect(addr) else {
        return;
    };
    if write_message(
        &mut stream,
        &Message::Hello {
            worker_id: "short".into(),
            cores: 1,
        },
    )
    .is_err()
    {
        return;
    }
    let mut file = File::open(&input).unwrap();
    for _ in 0..quota {
        match read_message(&mut stream) {
            Ok(Message::Assign(a)) => {
                let ctx = BlockContext {
                    input_path: &input,
                    output_dir: &out,
                    sample_format: a.sample_format,
                    fft_size: a.fft_size as usize,
                    kernel: a.kernel,
                    plan: None,
                };
                let Ok((part, timing)) =
                    process_block(&mut file, &a.descriptor, a.input_crc, &ctx)
                else {
                    return;
                };
                if write_message(
                    &mut stream,
                    &Message::BlockDone {
                        block_index: a.descriptor.block_index,
                        output_crc: part.crc64,
                        read_ns: timing.read_ns,
                        compute_ns: timing.compute_ns,
                        write_ns: timing.write_ns,
                    },
                )
                .is_err()
                {
                    return;
                }
            }
            _ => return,
        }
    }
}

#[test]
fn randomized_disconnect_schedule_never_deadlocks() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0xD15C);

    let dir = tempfile::tempdir().unwrap();
    let (input, manifest) = make_input(dir.path(), 24, 2, 128, 71);
    let out = dir.path().join("parts");
    std::fs::create_dir_all(&out).unwrap();

    let coordinator = Coordinator::bind("127.0.0.1:0").unwrap();
    let addr = coordinator.local_addr();
    let manifest_for_serve = manifest.clone();
    let config = CoordinatorConfig::new(Kernel::Identity);
    let serve = std::thread::spawn(move || coordinator.serve(&manifest_for_serve, &config));

    // A parade of workers that die after 0..4 completions, including some
    // that vanish while holding an assignment, then one steady finisher.
    let mut churn = Vec::new();
    for _ in 0..6 {
        let quota = rng.random_range(0..4usize);
        let (i, o) = (input.clone(), out.clone());
        churn.push(std::thread::spawn(move || short_lived_worker(addr, i, o, quota)));
        std::thread::sleep(std::time::Duration::from_millis(rng.random_range(0..20)));
    }
    for t in churn {
        t.join().unwrap();
    }
    let mut wc = WorkerConfig::new(addr.to_string(), &input, &out);
    wc.cores = 2;
    wc.worker_id = "finisher".into();
    let steady = std::thread::spawn(move || worker_run(&wc));

    let result = serve.join().unwrap().unwrap();
    assert!(result.success(), "every block must eventually complete");
    steady.join().unwrap().unwrap();

    // Exactly one part per block, all marked done.
    let merged = dir.path().join("out.bin");
    merge_parts(&out, &manifest, &merged, MergeOptions::default()).unwrap();
    assert_eq!(
        std::fs::read(&merged).unwrap(),
        std::fs::read(&input).unwrap()
    );
}

#[test]
fn coordinator_times_out_when_no_worker_appears() {
    let dir = tempfile::tempdir().unwrap();
    let (_input, manifest) = make_input(dir.path(), 3, 4, 128, 61);

    let coordinator = Coordinator::bind("127.0.0.1:0").unwrap();
    let mut config = CoordinatorConfig::new(Kernel::Identity);
    config.worker_timeout = Duration::from_millis(300);
    match coordinator.serve(&manifest, &config) {
        Err(NetError::TimedOut { pending, .. }) => {
            assert_eq!(pending, vec![0, 1, 2]);
        }
        other => panic!("expected TimedOut, got {other:?}"),
    }
}
