//! Patch decomposition of images, the patch-dictionary synthesis
//! operator, dictionary file I/O, and the ADMM dictionary learner.
//!
//! Images are column-major `f64` slices throughout. A [`PatchGeometry`]
//! fixes how an image tiles into non-overlapping patches; [`patchify`]
//! and [`unpatchify`] convert between the image and the matrix whose
//! columns are vectorized patches. A [`Dictionary`] holds non-negative
//! atoms for one patch shape, and [`global_dictionary_operator`] lifts it
//! to a linear map from per-patch coefficients to whole images.

mod learn;

pub use learn::{learn_dictionary_admm, DictLearnConfig, LearnOutcome};

use std::fs;
use std::io::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use thiserror::Error;

const DICT_MAGIC: &[u8; 8] = b"NNDICT1\n";

#[derive(Debug, Error)]
pub enum DictError {
    #[error("patch size {p}x{q} cannot tile a {m}x{n} image")]
    Geometry {
        m: usize,
        n: usize,
        p: usize,
        q: usize,
    },
    #[error("expected a length-{expected} image buffer, got {got}")]
    ImageLength { expected: usize, got: usize },
    #[error("patch matrix is {rows}x{cols}, geometry requires {want_rows}x{want_cols}")]
    PatchShape {
        rows: usize,
        cols: usize,
        want_rows: usize,
        want_cols: usize,
    },
    #[error("atoms for {p}x{q} patches need {expected} rows, got {got}")]
    AtomLength {
        p: usize,
        q: usize,
        expected: usize,
        got: usize,
    },
    #[error("dictionary needs at least one atom")]
    NoAtoms,
    #[error("dictionary entries must lie in [0, 1]")]
    EntryRange,
    #[error("dictionary atom {0} is all zeros")]
    ZeroAtom(usize),
    #[error("dictionary patch shape {dict_p}x{dict_q} does not match geometry {geom_p}x{geom_q}")]
    PatchMismatch {
        dict_p: usize,
        dict_q: usize,
        geom_p: usize,
        geom_q: usize,
    },
    #[error("patch extraction window {p}x{q} with stride {stride_rows}x{stride_cols} does not fit a {m}x{n} image")]
    ExtractWindow {
        m: usize,
        n: usize,
        p: usize,
        q: usize,
        stride_rows: usize,
        stride_cols: usize,
    },
    #[error("invalid learner configuration: {0}")]
    InvalidConfig(String),
    #[error("training patches must be finite and lie in [0, 1]")]
    TrainRange,
    #[error("ridge subproblem lost positive definiteness")]
    SubproblemFactorization,
    #[error("dictionary file I/O failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a dictionary file (bad magic)")]
    BadMagic,
    #[error("dictionary file length does not match its header")]
    BadLength,
    #[error("dictionary dimensions in file header overflow")]
    Overflow,
}

/// Tiling of an `image_rows x image_cols` image by non-overlapping
/// `patch_rows x patch_cols` patches. The patch grid is traversed
/// column-major, matching the image layout.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PatchGeometry {
    image_rows: usize,
    image_cols: usize,
    patch_rows: usize,
    patch_cols: usize,
}

impl PatchGeometry {
    pub fn new(
        image_rows: usize,
        image_cols: usize,
        patch_rows: usize,
        patch_cols: usize,
    ) -> Result<Self, DictError> {
        let divides = patch_rows >= 1
            && patch_cols >= 1
            && image_rows >= patch_rows
            && image_cols >= patch_cols
            && image_rows.is_multiple_of(patch_rows)
            && image_cols.is_multiple_of(patch_cols);
        if !divides {
            return Err(DictError::Geometry {
                m: image_rows,
                n: image_cols,
                p: patch_rows,
                q: patch_cols,
            });
        }
        Ok(PatchGeometry {
            image_rows,
            image_cols,
            patch_rows,
            patch_cols,
        })
    }

    pub fn image_rows(&self) -> usize {
        self.image_rows
    }

    pub fn image_cols(&self) -> usize {
        self.image_cols
    }

    pub fn patch_rows(&self) -> usize {
        self.patch_rows
    }

    pub fn patch_cols(&self) -> usize {
        self.patch_cols
    }

    /// Entries per patch.
    pub fn patch_len(&self) -> usize {
        self.patch_rows * self.patch_cols
    }

    /// Patches per image.
    pub fn n_patches(&self) -> usize {
        (self.image_rows / self.patch_rows) * (self.image_cols / self.patch_cols)
    }

    pub fn n_pixels(&self) -> usize {
        self.image_rows * self.image_cols
    }

    fn grid_rows(&self) -> usize {
        self.image_rows / self.patch_rows
    }
}

/// Splits a column-major image into the matrix whose column `j` is the
/// column-major vectorization of patch `j`, patches ordered column-major
/// over the patch grid. The rearrangement is a bijection on entries.
pub fn patchify(image: &[f64], geom: &PatchGeometry) -> Result<DMatrix<f64>, DictError> {
    if image.len() != geom.n_pixels() {
        return Err(DictError::ImageLength {
            expected: geom.n_pixels(),
            got: image.len(),
        });
    }
    let (m, p, q) = (geom.image_rows, geom.patch_rows, geom.patch_cols);
    let gm = geom.grid_rows();
    let mut out = DMatrix::zeros(geom.patch_len(), geom.n_patches());
    for (idx, mut col) in out.column_iter_mut().enumerate() {
        let (bi, bj) = (idx % gm, idx / gm);
        for pj in 0..q {
            for pi in 0..p {
                col[pj * p + pi] = image[(bj * q + pj) * m + bi * p + pi];
            }
        }
    }
    Ok(out)
}

/// Exact inverse of [`patchify`].
pub fn unpatchify(patches: &DMatrix<f64>, geom: &PatchGeometry) -> Result<Vec<f64>, DictError> {
    if patches.nrows() != geom.patch_len() || patches.ncols() != geom.n_patches() {
        return Err(DictError::PatchShape {
            rows: patches.nrows(),
            cols: patches.ncols(),
            want_rows: geom.patch_len(),
            want_cols: geom.n_patches(),
        });
    }
    let (m, p, q) = (geom.image_rows, geom.patch_rows, geom.patch_cols);
    let gm = geom.grid_rows();
    let mut image = vec![0.0; geom.n_pixels()];
    for (idx, col) in patches.column_iter().enumerate() {
        let (bi, bj) = (idx % gm, idx / gm);
        for pj in 0..q {
            for pi in 0..p {
                image[(bj * q + pj) * m + bi * p + pi] = col[pj * p + pi];
            }
        }
    }
    Ok(image)
}

/// Collects every `p x q` window whose top-left corner steps by the given
/// strides, as columns in corner-column-major order. With strides equal
/// to the patch dims this reproduces the non-overlapping tiling; smaller
/// strides yield overlapping training data.
pub fn extract_patches(
    image: &[f64],
    image_rows: usize,
    image_cols: usize,
    patch_rows: usize,
    patch_cols: usize,
    stride_rows: usize,
    stride_cols: usize,
) -> Result<DMatrix<f64>, DictError> {
    let fits = patch_rows >= 1
        && patch_cols >= 1
        && stride_rows >= 1
        && stride_cols >= 1
        && patch_rows <= image_rows
        && patch_cols <= image_cols;
    if !fits {
        return Err(DictError::ExtractWindow {
            m: image_rows,
            n: image_cols,
            p: patch_rows,
            q: patch_cols,
            stride_rows,
            stride_cols,
        });
    }
    if image.len() != image_rows * image_cols {
        return Err(DictError::ImageLength {
            expected: image_rows * image_cols,
            got: image.len(),
        });
    }
    let corners_i: Vec<usize> = (0..=image_rows - patch_rows).step_by(stride_rows).collect();
    let corners_j: Vec<usize> = (0..=image_cols - patch_cols).step_by(stride_cols).collect();
    let mut out = DMatrix::zeros(patch_rows * patch_cols, corners_i.len() * corners_j.len());
    let mut col = 0;
    for &cj in &corners_j {
        for &ci in &corners_i {
            for pj in 0..patch_cols {
                for pi in 0..patch_rows {
                    out[(pj * patch_rows + pi, col)] = image[(cj + pj) * image_rows + ci + pi];
                }
            }
            col += 1;
        }
    }
    Ok(out)
}

/// A set of patch atoms: columns of a `(p*q) x s` matrix with entries in
/// `[0, 1]` and no all-zero column.
#[derive(Clone, Debug, PartialEq)]
pub struct Dictionary {
    patch_rows: usize,
    patch_cols: usize,
    atoms: DMatrix<f64>,
}

impl Dictionary {
    pub fn new(
        patch_rows: usize,
        patch_cols: usize,
        atoms: DMatrix<f64>,
    ) -> Result<Self, DictError> {
        let expected = patch_rows * patch_cols;
        if expected == 0 || atoms.nrows() != expected {
            return Err(DictError::AtomLength {
                p: patch_rows,
                q: patch_cols,
                expected,
                got: atoms.nrows(),
            });
        }
        if atoms.ncols() == 0 {
            return Err(DictError::NoAtoms);
        }
        if atoms.iter().any(|v| !(*v >= 0.0 && *v <= 1.0)) {
            return Err(DictError::EntryRange);
        }
        for (j, col) in atoms.column_iter().enumerate() {
            if col.iter().all(|&v| v == 0.0) {
                return Err(DictError::ZeroAtom(j));
            }
        }
        Ok(Dictionary {
            patch_rows,
            patch_cols,
            atoms,
        })
    }

    pub fn patch_rows(&self) -> usize {
        self.patch_rows
    }

    pub fn patch_cols(&self) -> usize {
        self.patch_cols
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.ncols()
    }

    pub fn atoms(&self) -> &DMatrix<f64> {
        &self.atoms
    }
}

/// Synthesis map from stacked per-patch coefficients to an image.
///
/// The input is the column-major vectorization of an `s x r` coefficient
/// matrix (`s` atoms, `r` patches); patch `j` of the output image is the
/// atom combination `D * coeffs[:, j]`. The adjoint extracts patches and
/// correlates each against the atoms.
#[derive(Clone, Debug)]
pub struct GlobalDictionary {
    dict: Dictionary,
    geom: PatchGeometry,
}

impl GlobalDictionary {
    pub fn new(dict: Dictionary, geom: PatchGeometry) -> Result<Self, DictError> {
        if dict.patch_rows() != geom.patch_rows() || dict.patch_cols() != geom.patch_cols() {
            return Err(DictError::PatchMismatch {
                dict_p: dict.patch_rows(),
                dict_q: dict.patch_cols(),
                geom_p: geom.patch_rows(),
                geom_q: geom.patch_cols(),
            });
        }
        Ok(GlobalDictionary { dict, geom })
    }

    pub fn dictionary(&self) -> &Dictionary {
        &self.dict
    }

    pub fn geometry(&self) -> &PatchGeometry {
        &self.geom
    }

    pub fn n_rows(&self) -> usize {
        self.geom.n_pixels()
    }

    pub fn n_cols(&self) -> usize {
        self.dict.atom_count() * self.geom.n_patches()
    }

    pub(crate) fn apply(&self, x: &[f64]) -> Vec<f64> {
        let s = self.dict.atom_count();
        let coeffs = DMatrix::from_column_slice(s, self.geom.n_patches(), x);
        let patches = self.dict.atoms() * coeffs;
        unpatchify(&patches, &self.geom).expect("synthesis output shape is fixed by geometry")
    }

    pub(crate) fn apply_adjoint(&self, y: &[f64]) -> Vec<f64> {
        let patches = patchify(y, &self.geom).expect("adjoint input length checked by caller");
        let coeffs = self.dict.atoms().transpose() * patches;
        coeffs.as_slice().to_vec()
    }

    pub(crate) fn to_dense(&self) -> DMatrix<f64> {
        let (p, q) = (self.geom.patch_rows(), self.geom.patch_cols());
        let (m, s) = (self.geom.image_rows(), self.dict.atom_count());
        let gm = self.geom.grid_rows();
        let mut out = DMatrix::zeros(self.n_rows(), self.n_cols());
        for idx in 0..self.geom.n_patches() {
            let (bi, bj) = (idx % gm, idx / gm);
            for a in 0..s {
                let col = idx * s + a;
                for pj in 0..q {
                    for pi in 0..p {
                        out[((bj * q + pj) * m + bi * p + pi, col)] =
                            self.dict.atoms()[(pj * p + pi, a)];
                    }
                }
            }
        }
        out
    }
}

/// Wraps the synthesis map as a [`crate::linop::LinearOperator`].
pub fn global_dictionary_operator(
    dict: Dictionary,
    geom: PatchGeometry,
) -> Result<crate::linop::LinearOperator, DictError> {
    Ok(crate::linop::LinearOperator::Dictionary(
        GlobalDictionary::new(dict, geom)?,
    ))
}

/// Writes a dictionary in the `NNDICT1` format: the magic line, three
/// little-endian `u32` values (patch rows, patch cols, atom count), then
/// the atom matrix as little-endian `f64` values in column-major order.
pub fn save_dictionary(dict: &Dictionary, path: &Path) -> Result<(), DictError> {
    let mut bytes = Vec::with_capacity(8 + 12 + dict.atoms().len() * 8);
    bytes.extend_from_slice(DICT_MAGIC);
    for dim in [dict.patch_rows(), dict.patch_cols(), dict.atom_count()] {
        let dim = u32::try_from(dim).map_err(|_| DictError::Overflow)?;
        bytes.extend_from_slice(&dim.to_le_bytes());
    }
    for v in dict.atoms().iter() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    let mut file = fs::File::create(path)?;
    file.write_all(&bytes)?;
    Ok(())
}

/// Reads a dictionary written by [`save_dictionary`], re-validating every
/// invariant.
pub fn load_dictionary(path: &Path) -> Result<Dictionary, DictError> {
    let bytes = fs::read(path)?;
    if bytes.len() < 20 || &bytes[..8] != DICT_MAGIC {
        return Err(DictError::BadMagic);
    }
    let mut dims = [0usize; 3];
    for (k, dim) in dims.iter_mut().enumerate() {
        let start = 8 + 4 * k;
        let raw: [u8; 4] = bytes[start..start + 4].try_into().expect("fixed slice");
        *dim = u32::from_le_bytes(raw) as usize;
    }
    let [p, q, s] = dims;
    let n_values = p
        .checked_mul(q)
        .and_then(|pq| pq.checked_mul(s))
        .ok_or(DictError::Overflow)?;
    let payload = n_values.checked_mul(8).ok_or(DictError::Overflow)?;
    if bytes.len() != 20 + payload {
        return Err(DictError::BadLength);
    }
    let values: Vec<f64> = bytes[20..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunks_exact yields 8 bytes")))
        .collect();
    if values.iter().any(|v| !(*v >= 0.0 && *v <= 1.0)) {
        return Err(DictError::EntryRange);
    }
    Dictionary::new(p, q, DMatrix::from_column_slice(p * q, s, &values))
}
