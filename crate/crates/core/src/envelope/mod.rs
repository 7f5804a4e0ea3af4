//! Sealed transport for bitmaps crossing the untrusted provider.
//!
//! An envelope carries a key encapsulation to the recipient, an
//! authenticated ciphertext, and the sender's signature over every other
//! field. Primitives sit behind [`CipherSuite`]; the only suite shipped,
//! `TEST-NULLKEM`, is a non-production stand-in.
//!
//! Envelope wire format: magic `QCTE`, version byte, then six fields each
//! prefixed with a little-endian `u32` length: suite id, KEM ciphertext,
//! nonce, ciphertext, tag, signature.
//!
//! Key file format: 4-byte role tag (`BKND` or `USER`), kind byte
//! (1 public, 2 private), suite-id length byte, suite id, key bytes.

mod nullkem;

pub use nullkem::{TestNullKem, SUITE_ID as TEST_NULLKEM};

use std::fmt;

use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use zeroize::{Zeroize, Zeroizing};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnvelopeError {
    #[error("unknown cipher suite `{0}`")]
    UnknownSuite(String),
    #[error("key suite `{key}` does not match envelope suite `{envelope}`")]
    SuiteMismatch { key: String, envelope: String },
    #[error("authentication tag mismatch")]
    AuthFailure,
    #[error("signature verification failed")]
    SignatureFailure,
    #[error("envelope is not addressed to this key")]
    WrongRecipient,
    #[error("malformed {0}")]
    Malformed(&'static str),
    #[error("expected a {expected} key, found {found}")]
    WrongRole { expected: Role, found: Role },
}

/// KEM, authenticated cipher and signature primitives for one suite.
pub trait CipherSuite: Send + Sync {
    fn id(&self) -> &'static str;
    fn private_key_len(&self) -> usize;
    fn public_from_private(&self, sk: &[u8]) -> Vec<u8>;
    /// Returns the KEM ciphertext and the shared secret for randomness `r`.
    fn encapsulate(&self, pk: &[u8], r: [u8; 32]) -> (Vec<u8>, [u8; 32]);
    fn decapsulate(&self, sk: &[u8], kem_ct: &[u8]) -> Result<[u8; 32], EnvelopeError>;
    fn encrypt(&self, key: &[u8; 32], nonce: &[u8], aad: &[u8], pt: &[u8]) -> (Vec<u8>, Vec<u8>);
    fn decrypt(
        &self,
        key: &[u8; 32],
        nonce: &[u8],
        aad: &[u8],
        ct: &[u8],
        tag: &[u8],
    ) -> Result<Vec<u8>, EnvelopeError>;
    fn sign(&self, sk: &[u8], msg: &[&[u8]]) -> Vec<u8>;
    fn verify(&self, pk: &[u8], msg: &[&[u8]], sig: &[u8]) -> bool;
}

static SUITES: &[&dyn CipherSuite] = &[&TestNullKem];

pub fn suite(id: &str) -> Result<&'static dyn CipherSuite, EnvelopeError> {
    SUITES.iter().copied().find(|s| s.id() == id).ok_or_else(|| EnvelopeError::UnknownSuite(id.to_string()))
}

pub fn suite_ids() -> impl Iterator<Item = &'static str> {
    SUITES.iter().map(|s| s.id())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Backend,
    User,
}

impl Role {
    fn tag(self) -> &'static [u8; 4] {
        match self {
            Role::Backend => b"BKND",
            Role::User => b"USER",
        }
    }

    fn from_tag(tag: &[u8]) -> Option<Role> {
        match tag {
            b"BKND" => Some(Role::Backend),
            b"USER" => Some(Role::User),
            _ => None,
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Backend => "backend",
            Role::User => "user",
        })
    }
}

const KIND_PUBLIC: u8 = 1;
const KIND_PRIVATE: u8 = 2;
const KIND_SESSION: u8 = 3;

fn encode_key(role: Role, kind: u8, suite: &str, key: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(6 + suite.len() + key.len());
    out.extend_from_slice(role.tag());
    out.push(kind);
    out.push(suite.len() as u8);
    out.extend_from_slice(suite.as_bytes());
    out.extend_from_slice(key);
    out
}

fn decode_key(bytes: &[u8], kind: u8) -> Result<(Role, String, &[u8]), EnvelopeError> {
    let bad = EnvelopeError::Malformed("key file");
    if bytes.len() < 6 {
        return Err(bad);
    }
    let role = Role::from_tag(&bytes[..4]).ok_or(bad.clone())?;
    if bytes[4] != kind {
        return Err(bad);
    }
    let n = bytes[5] as usize;
    let id = bytes.get(6..6 + n).ok_or(bad.clone())?;
    let id = std::str::from_utf8(id).map_err(|_| bad)?;
    suite(id)?;
    Ok((role, id.to_string(), &bytes[6 + n..]))
}

#[derive(Clone, PartialEq, Eq)]
pub struct PublicKey {
    suite: String,
    role: Role,
    bytes: Vec<u8>,
}

impl PublicKey {
    pub fn suite_id(&self) -> &str {
        &self.suite
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn to_file_bytes(&self) -> Vec<u8> {
        encode_key(self.role, KIND_PUBLIC, &self.suite, &self.bytes)
    }

    pub fn from_file_bytes(bytes: &[u8]) -> Result<Self, EnvelopeError> {
        let (role, suite, key) = decode_key(bytes, KIND_PUBLIC)?;
        Ok(PublicKey { suite, role, bytes: key.to_vec() })
    }

    pub fn expect_role(self, role: Role) -> Result<Self, EnvelopeError> {
        check_role(role, self.role)?;
        Ok(self)
    }
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let hex: String = self.bytes.iter().take(8).map(|b| format!("{b:02x}")).collect();
        write!(f, "PublicKey({}, {}, {hex}..)", self.suite, self.role)
    }
}

/// Private key material; wiped on drop and never printed.
#[derive(Clone)]
pub struct PrivateKey {
    suite: String,
    role: Role,
    bytes: Zeroizing<Vec<u8>>,
}

impl PrivateKey {
    pub fn suite_id(&self) -> &str {
        &self.suite
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn public_key(&self) -> PublicKey {
        let s = suite(&self.suite).expect("checked on construction");
        PublicKey { suite: self.suite.clone(), role: self.role, bytes: s.public_from_private(&self.bytes) }
    }

    pub fn to_file_bytes(&self) -> Zeroizing<Vec<u8>> {
        Zeroizing::new(encode_key(self.role, KIND_PRIVATE, &self.suite, &self.bytes))
    }

    pub fn from_file_bytes(bytes: &[u8]) -> Result<Self, EnvelopeError> {
        let (role, id, key) = decode_key(bytes, KIND_PRIVATE)?;
        if key.len() != suite(&id)?.private_key_len() {
            return Err(EnvelopeError::Malformed("key file"));
        }
        Ok(PrivateKey { suite: id, role, bytes: Zeroizing::new(key.to_vec()) })
    }

    pub fn expect_role(self, role: Role) -> Result<Self, EnvelopeError> {
        check_role(role, self.role)?;
        Ok(self)
    }
}

impl fmt::Debug for PrivateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PrivateKey({}, {}, <redacted>)", self.suite, self.role)
    }
}

fn check_role(expected: Role, found: Role) -> Result<(), EnvelopeError> {
    if expected == found {
        Ok(())
    } else {
        Err(EnvelopeError::WrongRole { expected, found })
    }
}

#[derive(Debug, Clone)]
pub struct KeyPair {
    pub public: PublicKey,
    pub private: PrivateKey,
}

impl KeyPair {
    pub fn role(&self) -> Role {
        self.public.role
    }
}

pub fn keygen(suite_id: &str, role: Role, rng: &mut (impl RngCore + CryptoRng)) -> Result<KeyPair, EnvelopeError> {
    let s = suite(suite_id)?;
    let mut sk = Zeroizing::new(vec![0u8; s.private_key_len()]);
    rng.fill_bytes(&mut sk);
    let private = PrivateKey { suite: suite_id.to_string(), role, bytes: sk };
    Ok(KeyPair { public: private.public_key(), private })
}

/// Symmetric key shared by both ends of one job.
#[derive(Clone, PartialEq, Eq)]
pub struct SessionKey {
    suite: String,
    key: Zeroizing<[u8; 32]>,
}

impl SessionKey {
    pub fn suite_id(&self) -> &str {
        &self.suite
    }

    /// Overwrites the key in place; the handle stays usable but worthless.
    pub fn destroy(&mut self) {
        self.key.zeroize();
    }

    /// Client-side persistence between sealing a job and reading its
    /// results. The user role tag marks who keeps the file.
    pub fn to_file_bytes(&self) -> Zeroizing<Vec<u8>> {
        Zeroizing::new(encode_key(Role::User, KIND_SESSION, &self.suite, &self.key[..]))
    }

    pub fn from_file_bytes(bytes: &[u8]) -> Result<Self, EnvelopeError> {
        let (_, id, key) = decode_key(bytes, KIND_SESSION)?;
        let key: [u8; 32] = key.try_into().map_err(|_| EnvelopeError::Malformed("session file"))?;
        Ok(SessionKey { suite: id, key: Zeroizing::new(key) })
    }
}

impl fmt::Debug for SessionKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SessionKey({}, <redacted>)", self.suite)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Envelope {
    pub suite_id: String,
    pub kem_ciphertext: Vec<u8>,
    pub nonce: Vec<u8>,
    pub ciphertext: Vec<u8>,
    pub auth_tag: Vec<u8>,
    pub signature: Vec<u8>,
}

pub const ENVELOPE_MAGIC: &[u8; 4] = b"QCTE";
pub const ENVELOPE_VERSION: u8 = 1;
const NONCE_LEN: usize = 16;

impl Envelope {
    fn fields(&self) -> [&[u8]; 6] {
        [self.suite_id.as_bytes(), &self.kem_ciphertext, &self.nonce, &self.ciphertext, &self.auth_tag, &self.signature]
    }

    fn signed_fields(&self) -> [&[u8]; 5] {
        let [a, b, c, d, e, _] = self.fields();
        [a, b, c, d, e]
    }

    fn aad(&self) -> Vec<u8> {
        aad(&self.suite_id, &self.kem_ciphertext)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(ENVELOPE_MAGIC);
        out.push(ENVELOPE_VERSION);
        for f in self.fields() {
            out.extend_from_slice(&(f.len() as u32).to_le_bytes());
            out.extend_from_slice(f);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, EnvelopeError> {
        if bytes.len() < 5 || &bytes[..4] != ENVELOPE_MAGIC {
            return Err(EnvelopeError::Malformed("envelope magic"));
        }
        if bytes[4] != ENVELOPE_VERSION {
            return Err(EnvelopeError::Malformed("envelope version"));
        }
        let mut rest = &bytes[5..];
        let mut take = || -> Result<Vec<u8>, EnvelopeError> {
            let short = EnvelopeError::Malformed("envelope length");
            let len: [u8; 4] = rest.get(..4).ok_or(short.clone())?.try_into().unwrap();
            let len = u32::from_le_bytes(len) as usize;
            let field = rest.get(4..4 + len).ok_or(short)?.to_vec();
            rest = &rest[4 + len..];
            Ok(field)
        };
        let suite_id = take()?;
        let env = Envelope {
            suite_id: String::from_utf8(suite_id)
                .ok()
                .filter(|s| s.is_ascii())
                .ok_or(EnvelopeError::Malformed("suite id"))?,
            kem_ciphertext: take()?,
            nonce: take()?,
            ciphertext: take()?,
            auth_tag: take()?,
            signature: take()?,
        };
        if !rest.is_empty() {
            return Err(EnvelopeError::Malformed("trailing bytes"));
        }
        Ok(env)
    }
}

fn aad(suite_id: &str, kem_ct: &[u8]) -> Vec<u8> {
    let mut v = suite_id.as_bytes().to_vec();
    v.extend_from_slice(kem_ct);
    v
}

fn same_suite(key: &str, env: &str) -> Result<&'static dyn CipherSuite, EnvelopeError> {
    let s = suite(env)?;
    if key != env {
        return Err(EnvelopeError::SuiteMismatch { key: key.into(), envelope: env.into() });
    }
    Ok(s)
}

fn build(
    s: &dyn CipherSuite,
    key: &[u8; 32],
    kem_ciphertext: Vec<u8>,
    nonce: Vec<u8>,
    plaintext: &[u8],
    signer: &PrivateKey,
) -> Envelope {
    let (ciphertext, auth_tag) = s.encrypt(key, &nonce, &aad(s.id(), &kem_ciphertext), plaintext);
    let mut env =
        Envelope { suite_id: s.id().to_string(), kem_ciphertext, nonce, ciphertext, auth_tag, signature: Vec::new() };
    env.signature = s.sign(&signer.bytes, &env.signed_fields());
    env
}

/// Seals `plaintext` to `recipient`, signed by `signer`. Also returns the
/// session key so the sender can later open replies sealed in the session.
pub fn seal_with_session(
    plaintext: &[u8],
    recipient: &PublicKey,
    signer: &PrivateKey,
    rng: &mut (impl RngCore + CryptoRng),
) -> Result<(Envelope, SessionKey), EnvelopeError> {
    let s = same_suite(&signer.suite, &recipient.suite)?;
    let mut r = [0u8; 32];
    rng.fill_bytes(&mut r);
    let (kem_ct, shared) = s.encapsulate(&recipient.bytes, r);
    r.zeroize();
    let mut nonce = vec![0u8; NONCE_LEN];
    rng.fill_bytes(&mut nonce);
    let env = build(s, &shared, kem_ct, nonce, plaintext, signer);
    Ok((env, SessionKey { suite: s.id().to_string(), key: Zeroizing::new(shared) }))
}

pub fn seal(
    plaintext: &[u8],
    recipient: &PublicKey,
    signer: &PrivateKey,
    rng: &mut (impl RngCore + CryptoRng),
) -> Result<Envelope, EnvelopeError> {
    seal_with_session(plaintext, recipient, signer, rng).map(|(e, _)| e)
}

/// Opens an envelope, checking in order: decapsulation, tag, signature.
pub fn open_with_session(
    env: &Envelope,
    recipient: &PrivateKey,
    signer: &PublicKey,
) -> Result<(Vec<u8>, SessionKey), EnvelopeError> {
    let s = same_suite(&recipient.suite, &env.suite_id)?;
    same_suite(&signer.suite, &env.suite_id)?;
    let shared = Zeroizing::new(s.decapsulate(&recipient.bytes, &env.kem_ciphertext)?);
    let pt = s.decrypt(&shared, &env.nonce, &env.aad(), &env.ciphertext, &env.auth_tag)?;
    if !s.verify(&signer.bytes, &env.signed_fields(), &env.signature) {
        return Err(EnvelopeError::SignatureFailure);
    }
    Ok((pt, SessionKey { suite: s.id().to_string(), key: shared }))
}

pub fn open(env: &Envelope, recipient: &PrivateKey, signer: &PublicKey) -> Result<Vec<u8>, EnvelopeError> {
    open_with_session(env, recipient, signer).map(|(pt, _)| pt)
}

/// Seals a follow-up record under an established session. The nonce is the
/// record counter; the KEM field is empty.
pub fn seal_in_session(
    plaintext: &[u8],
    session: &SessionKey,
    counter: u64,
    signer: &PrivateKey,
) -> Result<Envelope, EnvelopeError> {
    let s = same_suite(&signer.suite, &session.suite)?;
    let mut nonce = vec![0u8; NONCE_LEN];
    nonce[..8].copy_from_slice(&counter.to_le_bytes());
    Ok(build(s, &session.key, Vec::new(), nonce, plaintext, signer))
}

pub fn open_in_session(env: &Envelope, session: &SessionKey, signer: &PublicKey) -> Result<Vec<u8>, EnvelopeError> {
    let s = same_suite(&session.suite, &env.suite_id)?;
    same_suite(&signer.suite, &env.suite_id)?;
    if !env.kem_ciphertext.is_empty() {
        return Err(EnvelopeError::Malformed("session record carries a KEM ciphertext"));
    }
    let pt = s.decrypt(&session.key, &env.nonce, &env.aad(), &env.ciphertext, &env.auth_tag)?;
    if !s.verify(&signer.bytes, &env.signed_fields(), &env.signature) {
        return Err(EnvelopeError::SignatureFailure);
    }
    Ok(pt)
}
