//! `.cmtx` layout: magic `CMTX`, version byte `1`, `u32` LE dims `(C, H, W)`,
//! then `C * H * W` `f32` LE values in channel-major order.

use std::io::{Read, Write};

use super::{validate_values, ImageTensor};
use crate::error::{Error, Result};

pub const RAW_MAGIC: [u8; 4] = *b"CMTX";
pub const RAW_VERSION: u8 = 1;
pub const RAW_HEADER_LEN: usize = 17;

const CHUNK_VALUES: usize = 16 * 1024;

/// File size in bytes for a tensor of the given shape.
pub fn raw_len(channels: usize, height: usize, width: usize) -> u64 {
    RAW_HEADER_LEN as u64 + 4 * (channels * height * width) as u64
}

pub fn write_raw<W: Write>(tensor: &ImageTensor, mut sink: W) -> Result<u64> {
    let (c, h, w) = tensor.shape();
    let dim = |v: usize| {
        u32::try_from(v).map_err(|_| Error::Format(format!("dimension {v} does not fit in u32")))
    };
    let mut header = [0u8; RAW_HEADER_LEN];
    header[..4].copy_from_slice(&RAW_MAGIC);
    header[4] = RAW_VERSION;
    header[5..9].copy_from_slice(&dim(c)?.to_le_bytes());
    header[9..13].copy_from_slice(&dim(h)?.to_le_bytes());
    header[13..17].copy_from_slice(&dim(w)?.to_le_bytes());

    let mut offset = 0u64;
    sink.write_all(&header)
        .map_err(|source| Error::Io { offset, source })?;
    offset += RAW_HEADER_LEN as u64;

    let mut buf = Vec::with_capacity(CHUNK_VALUES * 4);
    for chunk in tensor.data().chunks(CHUNK_VALUES) {
        buf.clear();
        for v in chunk {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        sink.write_all(&buf)
            .map_err(|source| Error::Io { offset, source })?;
        offset += buf.len() as u64;
    }
    sink.flush()
        .map_err(|source| Error::Io { offset, source })?;
    Ok(offset)
}

pub fn read_raw<R: Read>(mut source: R) -> Result<ImageTensor> {
    let mut header = Vec::with_capacity(RAW_HEADER_LEN);
    (&mut source)
        .take(RAW_HEADER_LEN as u64)
        .read_to_end(&mut header)
        .map_err(|source| Error::Io { offset: 0, source })?;
    if header.len() >= 4 && header[..4] != RAW_MAGIC {
        return Err(Error::Format(format!(
            "bad magic {:02x?}, expected {:02x?}",
            &header[..4],
            RAW_MAGIC
        )));
    }
    if header.len() < RAW_HEADER_LEN {
        return Err(Error::Truncated {
            expected: RAW_HEADER_LEN as u64,
            actual: header.len() as u64,
        });
    }
    if header[4] != RAW_VERSION {
        return Err(Error::UnsupportedVersion(header[4]));
    }
    let dim = |at: usize| u32::from_le_bytes(header[at..at + 4].try_into().unwrap()) as usize;
    let (c, h, w) = (dim(5), dim(9), dim(13));
    if c == 0 || h == 0 || w == 0 {
        return Err(Error::Format(format!("zero dimension in {c}x{h}x{w}")));
    }
    let count = c
        .checked_mul(h)
        .and_then(|n| n.checked_mul(w))
        .filter(|n| n.checked_mul(4).is_some())
        .ok_or_else(|| Error::Format(format!("dimensions {c}x{h}x{w} overflow")))?;
    let expected = 4 * count as u64;

    let mut payload = Vec::new();
    (&mut source)
        .take(expected)
        .read_to_end(&mut payload)
        .map_err(|source| Error::Io {
            offset: RAW_HEADER_LEN as u64,
            source,
        })?;
    if (payload.len() as u64) < expected {
        return Err(Error::Truncated {
            expected,
            actual: payload.len() as u64,
        });
    }
    let mut extra = [0u8; 1];
    let trailing = source.read(&mut extra).map_err(|source| Error::Io {
        offset: RAW_HEADER_LEN as u64 + expected,
        source,
    })?;
    if trailing != 0 {
        return Err(Error::Format(format!(
            "trailing bytes after {expected}-byte payload"
        )));
    }

    let data: Vec<f32> = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    validate_values("payload", &data)?;
    Ok(ImageTensor::from_parts(c, h, w, data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn header(magic: &[u8; 4], version: u8, dims: [u32; 3]) -> Vec<u8> {
        let mut v = magic.to_vec();
        v.push(version);
        for d in dims {
            v.extend_from_slice(&d.to_le_bytes());
        }
        v
    }

    #[test]
    fn single_zero_value_is_21_bytes() {
        let t = ImageTensor::filled(1, 1, 1, 0.0).unwrap();
        let mut out = Vec::new();
        assert_eq!(write_raw(&t, &mut out).unwrap(), 21);
        assert_eq!(out.len(), 21);
        assert_eq!(&out[17..], &[0, 0, 0, 0]);
        assert_eq!(&out[..5], b"CMTX\x01");
    }

    #[test]
    fn size_depends_only_on_shape() {
        let t = ImageTensor::filled(3, 2, 2, 0.25).unwrap();
        let mut out = Vec::new();
        write_raw(&t, &mut out).unwrap();
        assert_eq!(out.len(), 65);
        assert_eq!(raw_len(3, 2, 2), 65);
    }

    #[test]
    fn decodes_minimal_file() {
        let mut bytes = header(b"CMTX", 1, [1, 1, 1]);
        bytes.extend_from_slice(&0.5f32.to_le_bytes());
        let t = read_raw(bytes.as_slice()).unwrap();
        assert_eq!(t.shape(), (1, 1, 1));
        assert_eq!(t.data(), &[0.5]);
    }

    #[test]
    fn rejects_bad_magic() {
        let mut bytes = header(b"XXXX", 1, [1, 1, 1]);
        bytes.extend_from_slice(&0.5f32.to_le_bytes());
        assert!(matches!(read_raw(bytes.as_slice()), Err(Error::Format(_))));
    }

    #[test]
    fn rejects_other_versions() {
        let mut bytes = header(b"CMTX", 2, [1, 1, 1]);
        bytes.extend_from_slice(&0.5f32.to_le_bytes());
        assert!(matches!(
            read_raw(bytes.as_slice()),
            Err(Error::UnsupportedVersion(2))
        ));
    }

    #[test]
    fn truncation_reports_expected_length() {
        let mut bytes = header(b"CMTX", 1, [3, 2, 2]);
        bytes.extend_from_slice(&[0u8; 40]);
        match read_raw(bytes.as_slice()) {
            Err(Error::Truncated { expected, actual }) => {
                assert_eq!(expected, 48);
                assert_eq!(actual, 40);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn range_violation_names_index() {
        let mut bytes = header(b"CMTX", 1, [1, 1, 3]);
        for v in [0.1f32, 0.2, 1.25] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        assert!(matches!(
            read_raw(bytes.as_slice()),
            Err(Error::DataRange { index: 2, .. })
        ));
        let mut bytes = header(b"CMTX", 1, [1, 1, 1]);
        bytes.extend_from_slice(&f32::INFINITY.to_le_bytes());
        assert!(matches!(
            read_raw(bytes.as_slice()),
            Err(Error::DataRange { index: 0, .. })
        ));
    }

    #[test]
    fn rejects_trailing_bytes() {
        let mut bytes = header(b"CMTX", 1, [1, 1, 1]);
        bytes.extend_from_slice(&[0u8; 5]);
        assert!(matches!(read_raw(bytes.as_slice()), Err(Error::Format(_))));
    }

    struct FailAfter(usize);

    impl Write for FailAfter {
        fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
            if self.0 < buf.len() {
                return Err(std::io::Error::other("disk full"));
            }
            self.0 -= buf.len();
            Ok(buf.len())
        }
        fn flush(&mut self) -> std::io::Result<()> {
            Ok(())
        }
    }

    #[test]
    fn write_failure_reports_offset() {
        let t = ImageTensor::filled(1, 4, 4, 0.5).unwrap();
        match write_raw(&t, FailAfter(20)) {
            Err(Error::Io { offset, .. }) => assert_eq!(offset, 17),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn large_round_trip_is_bit_exact() {
        let mut state = 0x9e37_79b9_7f4a_7c15u64;
        let data: Vec<f32> = (0..3 * 224 * 224)
            .map(|_| {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                (state >> 40) as f32 / (1u64 << 24) as f32
            })
            .collect();
        let t = ImageTensor::new(3, 224, 224, data).unwrap();
        let mut bytes = Vec::new();
        write_raw(&t, &mut bytes).unwrap();
        let back = read_raw(bytes.as_slice()).unwrap();
        assert_eq!(back.shape(), t.shape());
        assert!(back
            .data()
            .iter()
            .zip(t.data())
            .all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    proptest! {
        #[test]
        fn write_then_read_is_identity(
            (c, h, w, data) in (1usize..4, 1usize..6, 1usize..6).prop_flat_map(|(c, h, w)| {
                (Just(c), Just(h), Just(w), proptest::collection::vec(0.0f32..=1.0, c * h * w))
            })
        ) {
            let t = ImageTensor::new(c, h, w, data).unwrap();
            let mut bytes = Vec::new();
            write_raw(&t, &mut bytes).unwrap();
            prop_assert_eq!(bytes.len() as u64, raw_len(c, h, w));
            let back = read_raw(bytes.as_slice()).unwrap();
            let mut again = Vec::new();
            write_raw(&back, &mut again).unwrap();
            prop_assert_eq!(bytes, again);
        }
    }
}
