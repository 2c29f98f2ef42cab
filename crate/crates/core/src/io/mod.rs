//! File formats: PGM images, dictionaries, needle dumps, checkpoints and
//! objective traces.

mod binary;
pub mod checkpoint;
pub mod pgm;
pub mod trace;

pub use binary::{
    needle_dump_len, read_dict, read_dict_file, read_needles, read_needles_file, write_dict,
    write_dict_file, write_needles, write_needles_file,
};
pub use checkpoint::{read_checkpoint, sidecar_path, write_checkpoint, CheckpointMeta};
pub use pgm::{decode_pgm, encode_pgm, read_pgm, write_pgm};
pub use trace::{write_objective_trace, write_train_trace};
