//! Binary dataset files: `manifest.json`, `data.bin` and, for datasets with
//! mixed images, `donors.bin`.
//!
//! Each `data.bin` record is little-endian and fixed-width:
//!
//! | bytes | field |
//! |------:|-------|
//! | 1 | label |
//! | 1 | digit |
//! | 1 | thickness flag (0 thin, 1 thick) |
//! | 4 | fg, bg, fg_tex, bg_tex (255 when unused) |
//! | 4 | morph (`f32`) |
//! | 1 | origin code |
//! | 40 | soft label (10 × `f32`) |
//! | 2352 | pixels, HWC |
//!
//! Records without a soft label store the one-hot target; only mixed
//! images read back with `soft_label` set. `donors.bin` holds
//! `[record index u32][6 factor bytes][morph f32]` for each mixed image.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::dataset::{AugmentationRecord, Dataset, DatasetSpec, Instance, Split};
use super::factors::{CanonicalMap, FactorTuple, Origin, Thickness, NUM_CLASSES};
use super::render::{Image, PIXELS};
use crate::{Error, Result};

pub const DATASET_FORMAT: &str = "cfaug-dataset/1";
pub const RECORD_BYTES: usize = 7 + 4 + 1 + 4 * NUM_CLASSES + PIXELS;
const DONOR_BYTES: usize = 4 + 6 + 4;

const MANIFEST: &str = "manifest.json";
const DATA: &str = "data.bin";
const DONORS: &str = "donors.bin";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub spec: DatasetSpec,
    pub split: Split,
    pub n_records: usize,
    pub record_bytes: usize,
    pub n_donors: usize,
    pub canonical: CanonicalMap,
    pub augmentation: Option<AugmentationRecord>,
    /// SHA-256 over `data.bin` followed by `donors.bin`.
    pub sha256: String,
    pub command_line: Option<String>,
}

fn put_factors(buf: &mut Vec<u8>, t: &FactorTuple) {
    let k = t.key();
    buf.extend_from_slice(&k);
}

fn encode_record(buf: &mut Vec<u8>, inst: &Instance) {
    buf.clear();
    buf.push(inst.label);
    put_factors(buf, &inst.factors);
    buf.extend_from_slice(&inst.factors.morph.to_le_bytes());
    buf.push(inst.origin.code());
    for v in inst.target() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf.extend_from_slice(inst.image.pixels());
}

fn encode_donor(buf: &mut Vec<u8>, index: usize, t: &FactorTuple) -> Result<()> {
    buf.clear();
    let index = u32::try_from(index).map_err(|_| Error::Format("record index exceeds u32".into()))?;
    buf.extend_from_slice(&index.to_le_bytes());
    put_factors(buf, t);
    buf.extend_from_slice(&t.morph.to_le_bytes());
    Ok(())
}

fn f32_at(b: &[u8], at: usize) -> f32 {
    f32::from_le_bytes(b[at..at + 4].try_into().expect("4 bytes"))
}

fn decode_factors(b: &[u8], morph: f32) -> Result<FactorTuple> {
    let opt = |v: u8| (v != u8::MAX).then_some(v);
    Ok(FactorTuple {
        digit: b[0],
        thickness: Thickness::from_index(b[1])?,
        morph,
        fg: opt(b[2]),
        bg: opt(b[3]),
        fg_tex: opt(b[4]),
        bg_tex: opt(b[5]),
    })
}

fn decode_record(b: &[u8]) -> Result<Instance> {
    let label = b[0];
    let morph = f32_at(b, 7);
    let factors = decode_factors(&b[1..7], morph)?;
    let origin = Origin::from_code(b[11])?;
    let soft: [f32; NUM_CLASSES] = std::array::from_fn(|k| f32_at(b, 12 + 4 * k));
    let image = Image::from_pixels(b[12 + 4 * NUM_CLASSES..].to_vec())?;
    Ok(Instance {
        image,
        label,
        soft_label: (origin == Origin::Patchmix).then_some(soft),
        factors,
        origin,
        donor: None,
    })
}

/// Stream every record of `dataset` through `sink`, data first, donors
/// after.
fn for_each_encoded(dataset: &Dataset, mut data: impl FnMut(&[u8]) -> Result<()>, mut donors: impl FnMut(&[u8]) -> Result<()>) -> Result<usize> {
    let mut buf = Vec::with_capacity(RECORD_BYTES);
    for inst in &dataset.instances {
        if inst.soft_label.is_some() != (inst.origin == Origin::Patchmix) {
            return Err(Error::Format(format!("soft label presence does not match origin {:?}", inst.origin)));
        }
        encode_record(&mut buf, inst);
        data(&buf)?;
    }
    let mut n = 0;
    for (i, inst) in dataset.instances.iter().enumerate() {
        if let Some(d) = &inst.donor {
            encode_donor(&mut buf, i, d)?;
            donors(&buf)?;
            n += 1;
        }
    }
    Ok(n)
}

impl Dataset {
    /// SHA-256 of the on-disk encoding, hex encoded.
    pub fn digest(&self) -> Result<String> {
        let hasher = std::cell::RefCell::new(Sha256::new());
        for_each_encoded(
            self,
            |b| {
                hasher.borrow_mut().update(b);
                Ok(())
            },
            |b| {
                hasher.borrow_mut().update(b);
                Ok(())
            },
        )?;
        Ok(hex::encode(hasher.into_inner().finalize()))
    }
}

/// Write `dataset` into directory `dir`, creating it if needed.
pub fn write_dataset(dataset: &Dataset, dir: &Path, command_line: Option<&str>) -> Result<Manifest> {
    std::fs::create_dir_all(dir)?;
    let hasher = std::cell::RefCell::new(Sha256::new());
    let mut data = BufWriter::new(File::create(dir.join(DATA))?);
    let mut donor_bytes = Vec::new();
    let n_donors = for_each_encoded(
        dataset,
        |b| {
            hasher.borrow_mut().update(b);
            data.write_all(b).map_err(Error::from)
        },
        |b| {
            hasher.borrow_mut().update(b);
            donor_bytes.extend_from_slice(b);
            Ok(())
        },
    )?;
    data.flush()?;
    let donor_path = dir.join(DONORS);
    if n_donors > 0 {
        std::fs::write(&donor_path, &donor_bytes)?;
    } else if donor_path.exists() {
        std::fs::remove_file(&donor_path)?;
    }
    let manifest = Manifest {
        format: DATASET_FORMAT.into(),
        spec: dataset.spec,
        split: dataset.split,
        n_records: dataset.len(),
        record_bytes: RECORD_BYTES,
        n_donors,
        canonical: dataset.canonical.clone(),
        augmentation: dataset.augmentation.clone(),
        sha256: hex::encode(hasher.into_inner().finalize()),
        command_line: command_line.map(str::to_owned),
    };
    std::fs::write(dir.join(MANIFEST), serde_json::to_vec_pretty(&manifest)?)?;
    Ok(manifest)
}

/// Read a dataset written by [`write_dataset`], verifying its digest.
pub fn read_dataset(dir: &Path) -> Result<(Dataset, Manifest)> {
    let manifest: Manifest = serde_json::from_slice(&std::fs::read(dir.join(MANIFEST))?)?;
    if manifest.format != DATASET_FORMAT {
        return Err(Error::Format(format!("unsupported dataset format `{}`", manifest.format)));
    }
    if manifest.record_bytes != RECORD_BYTES {
        return Err(Error::Format(format!("record width {} != {RECORD_BYTES}", manifest.record_bytes)));
    }
    let mut hasher = Sha256::new();
    let mut reader = BufReader::new(File::open(dir.join(DATA))?);
    let mut buf = vec![0u8; RECORD_BYTES];
    let mut instances = Vec::with_capacity(manifest.n_records);
    for _ in 0..manifest.n_records {
        reader.read_exact(&mut buf)?;
        hasher.update(&buf);
        instances.push(decode_record(&buf)?);
    }
    if reader.read(&mut [0u8; 1])? != 0 {
        return Err(Error::Format("trailing bytes in data file".into()));
    }
    if manifest.n_donors > 0 {
        let bytes = std::fs::read(dir.join(DONORS))?;
        if bytes.len() != manifest.n_donors * DONOR_BYTES {
            return Err(Error::Format("donor file size does not match manifest".into()));
        }
        hasher.update(&bytes);
        for rec in bytes.chunks_exact(DONOR_BYTES) {
            let idx = u32::from_le_bytes(rec[..4].try_into().expect("4 bytes")) as usize;
            let t = decode_factors(&rec[4..10], f32_at(rec, 10))?;
            let inst = instances
                .get_mut(idx)
                .ok_or_else(|| Error::Format(format!("donor index {idx} out of range")))?;
            inst.donor = Some(t);
        }
    }
    let digest = hex::encode(hasher.finalize());
    if digest != manifest.sha256 {
        return Err(Error::Format(format!("digest mismatch: manifest {} but data {digest}", manifest.sha256)));
    }
    let dataset = Dataset {
        spec: manifest.spec,
        split: manifest.split,
        instances,
        canonical: manifest.canonical.clone(),
        augmentation: manifest.augmentation.clone(),
    };
    Ok((dataset, manifest))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate_dataset, Variant};

    #[test]
    fn record_width() {
        assert_eq!(RECORD_BYTES, 2404);
    }

    #[test]
    fn round_trip_is_exact() {
        let spec = DatasetSpec::new(Variant::Wlm, 0.5, 40, 20, 9).unwrap();
        let (train, test) = generate_dataset(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        for ds in [&train, &test] {
            let m = write_dataset(ds, dir.path(), Some("cfaug gen")).unwrap();
            let (back, m2) = read_dataset(dir.path()).unwrap();
            assert_eq!(&back, ds);
            assert_eq!(m, m2);
            assert_eq!(m.sha256, ds.digest().unwrap());
        }
    }

    #[test]
    fn unused_factor_bytes() {
        let spec = DatasetSpec::new(Variant::Cm, 0.5, 3, 3, 0).unwrap();
        let (train, _) = generate_dataset(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_dataset(&train, dir.path(), None).unwrap();
        let bytes = std::fs::read(dir.path().join(DATA)).unwrap();
        assert_eq!(bytes.len(), 3 * RECORD_BYTES);
        for rec in bytes.chunks(RECORD_BYTES) {
            assert_eq!(&rec[4..7], &[255, 255, 255]);
            assert_eq!(f32_at(rec, 7), 0.9);
        }
    }

    #[test]
    fn corruption_is_detected() {
        let spec = DatasetSpec::new(Variant::Cm, 0.5, 3, 3, 0).unwrap();
        let (train, _) = generate_dataset(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_dataset(&train, dir.path(), None).unwrap();
        let path = dir.path().join(DATA);
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[100] ^= 1;
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(read_dataset(dir.path()), Err(Error::Format(_))));
    }
}
