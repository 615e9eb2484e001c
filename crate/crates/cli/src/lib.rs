//! File formats for the `ldni` command-line tool: triangle-mesh readers and
//! writers (OBJ, binary and ASCII STL) and the binary container for sampled
//! solids.

pub mod ldnifile;
pub mod meshio;

pub use ldnifile::{
    decode_ldni, encode_ldni, read_ldni, write_ldni, LdniFileError, LDNI_MAGIC, LDNI_VERSION,
};
pub use meshio::{read_mesh, write_mesh, write_mesh_auto, MeshFormat, MeshIoError};
