//! C ABI for flatdeg. Opaque handles plus error codes; see the generated
//! `include/flatdeg.h`.

#[no_mangle]
pub extern "C" fn fd_abi_version() -> u32 {
    1
}
