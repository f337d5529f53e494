// SPDX-License-Identifier: Apache-2.0

//! Word-addressed tile memory.

use crate::pe::ProgramImage;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Memory {
    words: Vec<u32>,
}

impl Memory {
    pub fn new(size_bytes: usize) -> Self {
        assert!(
            size_bytes.is_multiple_of(4),
            "memory size must be a multiple of 4"
        );
        Memory {
            words: vec![0; size_bytes / 4],
        }
    }

    pub fn size_bytes(&self) -> u32 {
        (self.words.len() * 4) as u32
    }

    fn index(&self, addr: u32) -> Option<usize> {
        if !addr.is_multiple_of(4) {
            return None;
        }
        let i = (addr / 4) as usize;
        (i < self.words.len()).then_some(i)
    }

    pub fn contains(&self, addr: u32) -> bool {
        self.index(addr).is_some()
    }

    /// Whether `words` words starting at `addr` are all mapped.
    pub fn contains_range(&self, addr: u32, words: u32) -> bool {
        addr.is_multiple_of(4) && (addr as u64 / 4 + words as u64) <= self.words.len() as u64
    }

    pub fn read(&self, addr: u32) -> Option<u32> {
        self.index(addr).map(|i| self.words[i])
    }

    pub fn write(&mut self, addr: u32, value: u32) -> bool {
        match self.index(addr) {
            Some(i) => {
                self.words[i] = value;
                true
            }
            None => false,
        }
    }

    /// Copy of `n` words starting at `addr`; panics when out of range.
    pub fn slice(&self, addr: u32, n: usize) -> &[u32] {
        let i = (addr / 4) as usize;
        &self.words[i..i + n]
    }

    pub fn write_slice(&mut self, addr: u32, data: &[u32]) {
        let i = (addr / 4) as usize;
        self.words[i..i + data.len()].copy_from_slice(data);
    }

    pub fn words(&self) -> &[u32] {
        &self.words
    }

    /// Place code followed by data at the image base.
    pub fn load_image(&mut self, image: &ProgramImage) -> Result<(), String> {
        let n = image.code.len() + image.data.len();
        if !self.contains_range(image.base, n as u32) {
            return Err(format!(
                "image of {} bytes at {:#x} does not fit {} bytes of memory",
                n * 4,
                image.base,
                self.size_bytes()
            ));
        }
        let words: Vec<u32> = image.words().collect();
        self.write_slice(image.base, &words);
        Ok(())
    }
}
