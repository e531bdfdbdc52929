//! Noise-free RNS-CKKS.

pub mod bconv;
pub mod ciphertext;
pub mod keys;
pub mod keyswitch;
pub mod serial;

pub use bconv::{bconv_exact, bconv_reference, mod_change, BaseTable};
pub use ciphertext::{
    decrypt, decrypt_decode, encrypt, encrypt_plaintext, h_add, h_mult, h_neg, h_rot, h_rot_keys, h_sub,
    p_add, p_mult, rescale, Ciphertext,
};
pub use keys::{keygen, KeyKind, KeySet, SecretKey, SwitchingKey};
pub use keyswitch::{
    decompose, fused_moddown_rescale, key_mult, key_switch, lift_to_qp, mod_down, mod_up, mod_up_all,
    rescale_poly,
};
