#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| retroholdout_fuzz::checks::chat_response(data));
