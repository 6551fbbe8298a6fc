//! RIFF/WAVE reading (16-bit PCM and 32-bit float) and a small writer.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{AudioClip, AudioError};

const FORMAT_PCM: u16 = 1;
const FORMAT_IEEE_FLOAT: u16 = 3;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

#[derive(Debug, Clone, Copy)]
struct Format {
    tag: u16,
    channels: u16,
    sample_rate: u32,
    bits: u16,
}

fn malformed(msg: impl Into<String>) -> AudioError {
    AudioError::MalformedWav(msg.into())
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

/// Reads a WAV file and downmixes it to mono.
pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioClip, AudioError> {
    let bytes = fs::read(path)?;
    read_wav_bytes(&bytes)
}

/// Parses an in-memory WAV file. Integer samples are scaled by 1/32768 and
/// channels are averaged.
pub fn read_wav_bytes(bytes: &[u8]) -> Result<AudioClip, AudioError> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(malformed("missing RIFF/WAVE header"));
    }
    let mut pos = 12;
    let mut format: Option<Format> = None;
    let mut data: Option<&[u8]> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let body_start = pos + 8;
        let body_end = body_start
            .checked_add(size)
            .ok_or_else(|| malformed("chunk size overflow"))?;
        match id {
            b"fmt " => {
                if size < 16 || body_end > bytes.len() {
                    return Err(malformed("truncated fmt chunk"));
                }
                let b = &bytes[body_start..body_end];
                let mut tag = u16_at(b, 0);
                let bits = u16_at(b, 14);
                if tag == FORMAT_EXTENSIBLE {
                    if size < 26 {
                        return Err(malformed("truncated extensible fmt chunk"));
                    }
                    // First two bytes of the sub-format GUID carry the real tag.
                    tag = u16_at(b, 24);
                }
                format = Some(Format {
                    tag,
                    channels: u16_at(b, 2),
                    sample_rate: u32_at(b, 4),
                    bits,
                });
            }
            b"data" => {
                if body_end > bytes.len() {
                    return Err(malformed(format!(
                        "data chunk declares {size} bytes, only {} present",
                        bytes.len() - body_start
                    )));
                }
                data = Some(&bytes[body_start..body_end]);
                break;
            }
            _ => {}
        }
        // Chunks are word aligned.
        pos = body_end + (size & 1);
    }
    let format = format.ok_or_else(|| malformed("no fmt chunk"))?;
    let data = data.ok_or_else(|| malformed("no data chunk"))?;
    if format.channels == 0 {
        return Err(malformed("zero channels"));
    }
    if format.sample_rate == 0 {
        return Err(malformed("zero sample rate"));
    }

    let channels = format.channels as usize;
    let interleaved: Vec<f64> = match (format.tag, format.bits) {
        (FORMAT_PCM, 16) => data
            .chunks_exact(2)
            .map(|c| i16::from_le_bytes([c[0], c[1]]) as f64 / 32768.0)
            .collect(),
        (FORMAT_IEEE_FLOAT, 32) => data
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect(),
        (tag, bits) => return Err(AudioError::UnsupportedEncoding { format: tag, bits }),
    };
    if !interleaved.len().is_multiple_of(channels) {
        return Err(malformed("data length is not a whole number of frames"));
    }
    let mono: Vec<f64> = interleaved
        .chunks_exact(channels)
        .map(|frame| frame.iter().sum::<f64>() / channels as f64)
        .collect();
    if mono.is_empty() {
        return Err(malformed("no audio frames"));
    }
    AudioClip::new(mono, format.sample_rate).map_err(|e| match e {
        AudioError::Invalid(m) => malformed(m),
        other => other,
    })
}

fn header(data_len: u32, tag: u16, bits: u16, rate: u32) -> Vec<u8> {
    let block_align = bits / 8;
    let mut h = Vec::with_capacity(44);
    h.extend_from_slice(b"RIFF");
    h.extend_from_slice(&(36 + data_len).to_le_bytes());
    h.extend_from_slice(b"WAVE");
    h.extend_from_slice(b"fmt ");
    h.extend_from_slice(&16u32.to_le_bytes());
    h.extend_from_slice(&tag.to_le_bytes());
    h.extend_from_slice(&1u16.to_le_bytes());
    h.extend_from_slice(&rate.to_le_bytes());
    h.extend_from_slice(&(rate * block_align as u32).to_le_bytes());
    h.extend_from_slice(&block_align.to_le_bytes());
    h.extend_from_slice(&bits.to_le_bytes());
    h.extend_from_slice(b"data");
    h.extend_from_slice(&data_len.to_le_bytes());
    h
}

/// Writes a mono 16-bit PCM file. Samples are rounded and saturated.
pub fn write_wav_i16(path: impl AsRef<Path>, clip: &AudioClip) -> Result<(), AudioError> {
    let mut out = header((clip.len() * 2) as u32, FORMAT_PCM, 16, clip.sample_rate());
    for &s in clip.samples() {
        let v = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&v.to_le_bytes());
    }
    fs::File::create(path)?.write_all(&out)?;
    Ok(())
}

/// Writes a mono 32-bit float file.
pub fn write_wav_f32(path: impl AsRef<Path>, clip: &AudioClip) -> Result<(), AudioError> {
    let mut out = header(
        (clip.len() * 4) as u32,
        FORMAT_IEEE_FLOAT,
        32,
        clip.sample_rate(),
    );
    for &s in clip.samples() {
        out.extend_from_slice(&(s as f32).to_le_bytes());
    }
    fs::File::create(path)?.write_all(&out)?;
    Ok(())
}
