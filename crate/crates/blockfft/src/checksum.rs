//! CRC-64 checksums (CRC-64/XZ) used for input and part integrity.

use std::fs::File;
use std::io::{self, Read};
use std::path::Path;

use crc::{Crc, CRC_64_XZ};

pub const CRC64: Crc<u64> = Crc::<u64>::new(&CRC_64_XZ);

/// Checksum of an in-memory byte slice.
pub fn crc64(bytes: &[u8]) -> u64 {
    CRC64.checksum(bytes)
}

/// Streaming checksum of a whole file.
pub fn crc64_file(path: &Path) -> io::Result<u64> {
    let mut file = File::open(path)?;
    let mut digest = CRC64.digest();
    let mut buf = vec![0u8; 1 << 20];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        digest.update(&buf[..n]);
    }
    Ok(digest.finalize())
}
