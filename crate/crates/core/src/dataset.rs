//! Packed bit datasets and the raw-data loaders that feed the booleanizers.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;

use crate::bits::{tail_mask, words_for, SampleRef};
use crate::error::{Error, Result};
use crate::model::Reader;

/// `N` samples of `F` bits, row-major, each row padded with zero bits to a
/// whole number of `u64` words.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitDataset {
    features: usize,
    classes: usize,
    words_per_row: usize,
    rows: Vec<u64>,
    labels: Vec<u32>,
}

impl BitDataset {
    pub fn new(features: usize, classes: usize) -> Self {
        Self {
            features,
            classes,
            words_per_row: words_for(features),
            rows: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn push(&mut self, sample: SampleRef<'_>, label: u32) -> Result<()> {
        if sample.width() != self.features {
            return Err(Error::WidthMismatch {
                expected: self.features,
                actual: sample.width(),
            });
        }
        if label as usize >= self.classes {
            return Err(Error::LabelOutOfRange {
                label: label as usize,
                classes: self.classes,
            });
        }
        self.rows.extend_from_slice(sample.words());
        self.labels.push(label);
        Ok(())
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    #[inline]
    pub fn features(&self) -> usize {
        self.features
    }

    #[inline]
    pub fn classes(&self) -> usize {
        self.classes
    }

    #[inline]
    pub fn words_per_row(&self) -> usize {
        self.words_per_row
    }

    #[inline]
    pub fn label(&self, i: usize) -> u32 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[u64] {
        &self.rows[i * self.words_per_row..(i + 1) * self.words_per_row]
    }

    /// All rows back to back.
    pub fn rows(&self) -> &[u64] {
        &self.rows
    }

    #[inline]
    pub fn sample(&self, i: usize) -> SampleRef<'_> {
        SampleRef::new_unchecked(self.row(i), self.features)
    }

    /// The samples at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut out = Self::new(self.features, self.classes);
        for &i in indices {
            out.rows.extend_from_slice(self.row(i));
            out.labels.push(self.labels[i]);
        }
        out
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(CONTAINER_HEADER_LEN + self.rows.len() * 8 + self.labels.len() * 4 + 4);
        out.extend_from_slice(CONTAINER_MAGIC);
        out.extend_from_slice(&CONTAINER_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.len() as u64).to_le_bytes());
        out.extend_from_slice(&(self.features as u64).to_le_bytes());
        out.extend_from_slice(&(self.classes as u32).to_le_bytes());
        out.extend_from_slice(&0u32.to_le_bytes());
        for w in &self.rows {
            out.extend_from_slice(&w.to_le_bytes());
        }
        for l in &self.labels {
            out.extend_from_slice(&l.to_le_bytes());
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 || &bytes[..4] != CONTAINER_MAGIC {
            return Err(Error::BadMagic);
        }
        if bytes.len() < CONTAINER_HEADER_LEN + 4 {
            return Err(Error::Truncated("dataset header".into()));
        }
        let mut r = Reader::new(&bytes[4..CONTAINER_HEADER_LEN]);
        let version = r.u32();
        if version != CONTAINER_VERSION {
            return Err(Error::VersionMismatch {
                expected: CONTAINER_VERSION,
                found: version,
            });
        }
        let too_big = || Error::Malformed("dataset dimensions overflow".into());
        let n = usize::try_from(r.u64()).map_err(|_| too_big())?;
        let features = usize::try_from(r.u64()).map_err(|_| too_big())?;
        let classes = r.u32() as usize;
        let words_per_row = words_for(features);
        let payload = n
            .checked_mul(words_per_row)
            .and_then(|w| w.checked_mul(8))
            .and_then(|b| b.checked_add(n.checked_mul(4)?))
            .ok_or_else(too_big)?;
        let expected = CONTAINER_HEADER_LEN + payload + 4;
        if bytes.len() < expected {
            return Err(Error::Truncated(format!(
                "dataset needs {expected} bytes, file has {}",
                bytes.len()
            )));
        }
        if bytes.len() > expected {
            return Err(Error::Malformed(format!(
                "{} trailing bytes after dataset",
                bytes.len() - expected
            )));
        }
        let body = &bytes[..expected - 4];
        let stored = u32::from_le_bytes(bytes[expected - 4..].try_into().unwrap());
        let computed = crc32fast::hash(body);
        if stored != computed {
            return Err(Error::ChecksumMismatch { stored, computed });
        }

        let row_bytes = &body[CONTAINER_HEADER_LEN..CONTAINER_HEADER_LEN + n * words_per_row * 8];
        let rows: Vec<u64> = row_bytes
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let labels: Vec<u32> = body[CONTAINER_HEADER_LEN + row_bytes.len()..]
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if words_per_row > 0 {
            let mask = !tail_mask(features);
            if rows.chunks_exact(words_per_row).any(|r| r[words_per_row - 1] & mask != 0) {
                return Err(Error::Malformed("padding bits set in dataset row".into()));
            }
        }
        if let Some(&bad) = labels.iter().find(|&&l| l as usize >= classes) {
            return Err(Error::LabelOutOfRange {
                label: bad as usize,
                classes,
            });
        }
        Ok(Self {
            features,
            classes,
            words_per_row,
            rows,
            labels,
        })
    }

    pub fn write_container(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut file = fs::File::create(path)?;
        file.write_all(&self.to_bytes())?;
        file.sync_all()?;
        Ok(())
    }

    pub fn read_container(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

pub const CONTAINER_MAGIC: &[u8; 4] = b"FPTD";
pub const CONTAINER_VERSION: u32 = 1;
/// magic, version, N, F, classes, reserved
const CONTAINER_HEADER_LEN: usize = 4 + 4 + 8 + 8 + 4 + 4;

/// Greyscale images with labels, as stored in IDX files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageSet {
    pub rows: usize,
    pub cols: usize,
    /// `len() * rows * cols` bytes, image-major, row-major within an image.
    pub pixels: Vec<u8>,
    pub labels: Vec<u8>,
}

impl ImageSet {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn image(&self, i: usize) -> &[u8] {
        let size = self.rows * self.cols;
        &self.pixels[i * size..(i + 1) * size]
    }

    pub fn classes(&self) -> usize {
        self.labels.iter().map(|&l| l as usize + 1).max().unwrap_or(0)
    }
}

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// Reads a file, transparently gunzipping it when it starts with the gzip magic.
fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path)?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice()).read_to_end(&mut out)?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn be_u32(bytes: &[u8], at: usize, what: &str) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes(b.try_into().unwrap()))
        .ok_or_else(|| Error::Truncated(format!("IDX {what} header")))
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, usize, usize, Vec<u8>)> {
    let magic = be_u32(bytes, 0, "images")?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::Malformed(format!("IDX images magic {magic:#010x}, expected 0x00000803")));
    }
    let count = be_u32(bytes, 4, "images")? as usize;
    let rows = be_u32(bytes, 8, "images")? as usize;
    let cols = be_u32(bytes, 12, "images")? as usize;
    let need = count * rows * cols;
    let data = &bytes[16..];
    if data.len() < need {
        return Err(Error::Truncated(format!(
            "IDX images: expected {need} pixel bytes, found {}",
            data.len()
        )));
    }
    Ok((count, rows, cols, data[..need].to_vec()))
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = be_u32(bytes, 0, "labels")?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::Malformed(format!("IDX labels magic {magic:#010x}, expected 0x00000801")));
    }
    let count = be_u32(bytes, 4, "labels")? as usize;
    let data = &bytes[8..];
    if data.len() < count {
        return Err(Error::Truncated(format!(
            "IDX labels: expected {count} bytes, found {}",
            data.len()
        )));
    }
    Ok(data[..count].to_vec())
}

/// Loads an IDX image file and its label file (raw or gzipped).
pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<ImageSet> {
    let (count, rows, cols, pixels) = parse_idx_images(&read_maybe_gz(images_path.as_ref())?)?;
    let labels = parse_idx_labels(&read_maybe_gz(labels_path.as_ref())?)?;
    if labels.len() != count {
        return Err(Error::Malformed(format!(
            "{count} images but {} labels",
            labels.len()
        )));
    }
    Ok(ImageSet {
        rows,
        cols,
        pixels,
        labels,
    })
}

/// Fashion-MNIST split file names inside a directory, accepting either the
/// raw or the gzipped distribution.
pub fn fashion_mnist_paths(dir: impl AsRef<Path>, split: &str) -> Result<(PathBuf, PathBuf)> {
    let prefix = match split {
        "train" => "train",
        "test" => "t10k",
        other => return Err(Error::InvalidArgument(format!("unknown split `{other}`"))),
    };
    let find = |stem: String| -> Result<PathBuf> {
        for name in [stem.clone(), format!("{stem}.gz")] {
            let p = dir.as_ref().join(name);
            if p.is_file() {
                return Ok(p);
            }
        }
        Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("{} not found in {}", stem, dir.as_ref().display()),
        )))
    };
    Ok((
        find(format!("{prefix}-images-idx3-ubyte"))?,
        find(format!("{prefix}-labels-idx1-ubyte"))?,
    ))
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabeledCorpus {
    pub documents: Vec<String>,
    pub labels: Vec<u32>,
}

impl LabeledCorpus {
    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            documents: indices.iter().map(|&i| self.documents[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImdbCorpus {
    pub train: LabeledCorpus,
    pub test: LabeledCorpus,
}

/// Loads the `aclImdb` layout: `{train,test}/{neg,pos}/*.txt`. Negative
/// reviews are label 0 and come first; files are sorted by name.
pub fn load_imdb_dir(root: impl AsRef<Path>) -> Result<ImdbCorpus> {
    let root = root.as_ref();
    let split = |name: &str| -> Result<LabeledCorpus> {
        let mut corpus = LabeledCorpus::default();
        for (label, class) in [(0u32, "neg"), (1, "pos")] {
            let dir = root.join(name).join(class);
            if !dir.is_dir() {
                return Err(Error::Io(std::io::Error::new(
                    std::io::ErrorKind::NotFound,
                    format!("missing IMDb directory {}", dir.display()),
                )));
            }
            let mut files: Vec<PathBuf> = fs::read_dir(&dir)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|e| e == "txt"))
                .collect();
            files.sort();
            for f in files {
                let bytes = fs::read(&f)?;
                corpus.documents.push(String::from_utf8_lossy(&bytes).into_owned());
                corpus.labels.push(label);
            }
        }
        if corpus.is_empty() {
            return Err(Error::Empty(format!("no reviews under {}", root.join(name).display())));
        }
        Ok(corpus)
    };
    Ok(ImdbCorpus {
        train: split("train")?,
        test: split("test")?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bits::BitSample;

    fn dataset() -> BitDataset {
        let mut d = BitDataset::new(70, 3);
        for i in 0..5u32 {
            let bits: Vec<bool> = (0..70).map(|j| (j as u32 + i).is_multiple_of(4)).collect();
            d.push(BitSample::from_bools(&bits).view(), i % 3).unwrap();
        }
        d
    }

    #[test]
    fn container_round_trip() {
        let d = dataset();
        assert_eq!(d.words_per_row(), 2);
        let back = BitDataset::from_bytes(&d.to_bytes()).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn container_rejects_corruption() {
        let bytes = dataset().to_bytes();
        let mut bad = bytes.clone();
        bad[40] ^= 0x10;
        assert!(matches!(BitDataset::from_bytes(&bad), Err(Error::ChecksumMismatch { .. })));
        let mut bad = bytes.clone();
        bad[4] = 2;
        assert!(matches!(BitDataset::from_bytes(&bad), Err(Error::VersionMismatch { .. })));
        assert!(matches!(BitDataset::from_bytes(&bytes[..50]), Err(Error::Truncated(_))));
        assert!(matches!(BitDataset::from_bytes(b"nope"), Err(Error::BadMagic)));
    }

    #[test]
    fn container_size_arithmetic() {
        // 25,000 rows of 12,800 bits is 40,000,000 payload bytes.
        let d = BitDataset::new(12_800, 2);
        assert_eq!(d.words_per_row() * 8 * 25_000, 40_000_000);
        assert_eq!(d.to_bytes().len(), CONTAINER_HEADER_LEN + 4);
    }

    #[test]
    fn push_validates() {
        let mut d = BitDataset::new(8, 2);
        assert!(d.push(BitSample::zeros(9).view(), 0).is_err());
        assert!(d.push(BitSample::zeros(8).view(), 2).is_err());
    }

    fn idx_images(count: u32, rows: u32, cols: u32, pixels: &[u8]) -> Vec<u8> {
        let mut v = Vec::new();
        for x in [IDX_IMAGES_MAGIC, count, rows, cols] {
            v.extend_from_slice(&x.to_be_bytes());
        }
        v.extend_from_slice(pixels);
        v
    }

    fn idx_labels(magic: u32, labels: &[u8]) -> Vec<u8> {
        let mut v = Vec::new();
        v.extend_from_slice(&magic.to_be_bytes());
        v.extend_from_slice(&(labels.len() as u32).to_be_bytes());
        v.extend_from_slice(labels);
        v
    }

    #[test]
    fn idx_parsing() {
        let dir = tempfile::tempdir().unwrap();
        let img = dir.path().join("img");
        let lab = dir.path().join("lab");
        fs::write(&img, idx_images(2, 2, 3, &[1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12])).unwrap();
        fs::write(&lab, idx_labels(IDX_LABELS_MAGIC, &[4, 9])).unwrap();
        let set = load_idx(&img, &lab).unwrap();
        assert_eq!((set.len(), set.rows, set.cols), (2, 2, 3));
        assert_eq!(set.image(1), &[7, 8, 9, 10, 11, 12]);
        assert_eq!(set.classes(), 10);

        fs::write(&lab, idx_labels(0x0803, &[4, 9])).unwrap();
        assert!(load_idx(&img, &lab).is_err());

        fs::write(&lab, idx_labels(IDX_LABELS_MAGIC, &[4])).unwrap();
        assert!(load_idx(&img, &lab).is_err());

        fs::write(&img, idx_images(2, 2, 3, &[1, 2, 3])).unwrap();
        assert!(matches!(parse_idx_images(&fs::read(&img).unwrap()), Err(Error::Truncated(_))));
    }

    #[test]
    fn idx_gzip() {
        use flate2::write::GzEncoder;
        let dir = tempfile::tempdir().unwrap();
        let img = dir.path().join("img.gz");
        let lab = dir.path().join("lab.gz");
        let gz = |bytes: Vec<u8>| {
            let mut e = GzEncoder::new(Vec::new(), flate2::Compression::fast());
            e.write_all(&bytes).unwrap();
            e.finish().unwrap()
        };
        fs::write(&img, gz(idx_images(1, 1, 2, &[5, 6]))).unwrap();
        fs::write(&lab, gz(idx_labels(IDX_LABELS_MAGIC, &[1]))).unwrap();
        let set = load_idx(&img, &lab).unwrap();
        assert_eq!(set.pixels, vec![5, 6]);
    }

    #[test]
    fn imdb_layout() {
        let dir = tempfile::tempdir().unwrap();
        assert!(load_imdb_dir(dir.path()).is_err());
        for split in ["train", "test"] {
            for class in ["neg", "pos"] {
                let d = dir.path().join(split).join(class);
                fs::create_dir_all(&d).unwrap();
                fs::write(d.join("1_2.txt"), format!("{split} {class} one")).unwrap();
                fs::write(d.join("0_3.txt"), format!("{split} {class} zero")).unwrap();
            }
        }
        let corpus = load_imdb_dir(dir.path()).unwrap();
        assert_eq!(corpus.train.labels, vec![0, 0, 1, 1]);
        assert_eq!(corpus.train.documents[0], "train neg zero");
        assert_eq!(corpus.test.documents[3], "test pos one");
        assert_eq!(load_imdb_dir(dir.path()).unwrap(), corpus);
    }
}
