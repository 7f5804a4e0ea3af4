//! `TEST-NULLKEM`: a hash-based stand-in for a real KEM + AEAD + signature
//! stack. It exercises every protocol path but offers no security: the
//! "signature" is a MAC keyed by the signer's public key, so anyone holding
//! that key can forge it.

use hmac::{Hmac, Mac};
use sha2::{Digest, Sha256};

use super::{CipherSuite, EnvelopeError};

type HmacSha256 = Hmac<Sha256>;

pub const SUITE_ID: &str = "TEST-NULLKEM";

const SK_LEN: usize = 32;
const R_LEN: usize = 32;
const CONFIRM_LEN: usize = 16;
const TAG_LEN: usize = 16;

fn hash(parts: &[&[u8]]) -> [u8; 32] {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    h.finalize().into()
}

fn mac(key: &[u8], parts: &[&[u8]]) -> HmacSha256 {
    let mut m = HmacSha256::new_from_slice(key).expect("hmac takes any key length");
    for p in parts {
        m.update(&(p.len() as u64).to_le_bytes());
        m.update(p);
    }
    m
}

#[derive(Debug, Clone, Copy, Default)]
pub struct TestNullKem;

impl CipherSuite for TestNullKem {
    fn id(&self) -> &'static str {
        SUITE_ID
    }

    fn private_key_len(&self) -> usize {
        SK_LEN
    }

    fn public_from_private(&self, sk: &[u8]) -> Vec<u8> {
        hash(&[b"qctee-nullkem-pk", sk]).to_vec()
    }

    fn encapsulate(&self, pk: &[u8], r: [u8; 32]) -> (Vec<u8>, [u8; 32]) {
        let confirm = hash(&[b"confirm", pk, &r]);
        let mut ct = r.to_vec();
        ct.extend_from_slice(&confirm[..CONFIRM_LEN]);
        (ct, hash(&[b"shared", pk, &r]))
    }

    fn decapsulate(&self, sk: &[u8], kem_ct: &[u8]) -> Result<[u8; 32], EnvelopeError> {
        if kem_ct.len() != R_LEN + CONFIRM_LEN {
            return Err(EnvelopeError::WrongRecipient);
        }
        let pk = self.public_from_private(sk);
        let (r, confirm) = kem_ct.split_at(R_LEN);
        let expected = hash(&[b"confirm", &pk, r]);
        if !constant_eq(&expected[..CONFIRM_LEN], confirm) {
            return Err(EnvelopeError::WrongRecipient);
        }
        Ok(hash(&[b"shared", &pk, r]))
    }

    fn encrypt(&self, key: &[u8; 32], nonce: &[u8], aad: &[u8], pt: &[u8]) -> (Vec<u8>, Vec<u8>) {
        let (enc, mac_key) = split_key(key);
        let ct = xor_stream(&enc, nonce, pt);
        let tag = mac(&mac_key, &[aad, nonce, &ct]).finalize().into_bytes();
        (ct, tag[..TAG_LEN].to_vec())
    }

    fn decrypt(
        &self,
        key: &[u8; 32],
        nonce: &[u8],
        aad: &[u8],
        ct: &[u8],
        tag: &[u8],
    ) -> Result<Vec<u8>, EnvelopeError> {
        let (enc, mac_key) = split_key(key);
        mac(&mac_key, &[aad, nonce, ct])
            .verify_truncated_left(tag)
            .ok()
            .filter(|_| tag.len() == TAG_LEN)
            .ok_or(EnvelopeError::AuthFailure)?;
        Ok(xor_stream(&enc, nonce, ct))
    }

    fn sign(&self, sk: &[u8], msg: &[&[u8]]) -> Vec<u8> {
        let pk = self.public_from_private(sk);
        mac(&pk, msg).finalize().into_bytes().to_vec()
    }

    fn verify(&self, pk: &[u8], msg: &[&[u8]], sig: &[u8]) -> bool {
        mac(pk, msg).verify_slice(sig).is_ok()
    }
}

fn split_key(key: &[u8; 32]) -> ([u8; 32], [u8; 32]) {
    (hash(&[b"enc", key]), hash(&[b"mac", key]))
}

fn xor_stream(key: &[u8; 32], nonce: &[u8], data: &[u8]) -> Vec<u8> {
    data.chunks(32)
        .enumerate()
        .flat_map(|(i, chunk)| {
            let block = hash(&[key, nonce, &(i as u64).to_le_bytes()]);
            chunk.iter().zip(block).map(|(d, k)| d ^ k).collect::<Vec<_>>()
        })
        .collect()
}

fn constant_eq(a: &[u8], b: &[u8]) -> bool {
    a.len() == b.len() && a.iter().zip(b).fold(0u8, |acc, (x, y)| acc | (x ^ y)) == 0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keystream_is_an_involution() {
        let key = [7u8; 32];
        let data: Vec<u8> = (0..100).collect();
        let ct = xor_stream(&key, b"nonce", &data);
        assert_ne!(ct, data);
        assert_eq!(xor_stream(&key, b"nonce", &ct), data);
    }

    #[test]
    fn decapsulation_recovers_shared_secret() {
        let s = TestNullKem;
        let sk = [1u8; 32];
        let (ct, ss) = s.encapsulate(&s.public_from_private(&sk), [9u8; 32]);
        assert_eq!(s.decapsulate(&sk, &ct).unwrap(), ss);
        assert_eq!(s.decapsulate(&[2u8; 32], &ct), Err(EnvelopeError::WrongRecipient));
    }

    #[test]
    fn short_tag_is_rejected() {
        let s = TestNullKem;
        let key = [3u8; 32];
        let (ct, tag) = s.encrypt(&key, b"n", b"", b"hello");
        assert!(s.decrypt(&key, b"n", b"", &ct, &tag[..8]).is_err());
        assert_eq!(s.decrypt(&key, b"n", b"", &ct, &tag).unwrap(), b"hello");
    }
}
