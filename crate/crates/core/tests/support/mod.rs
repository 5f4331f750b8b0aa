#![allow(dead_code)]

pub mod airy_quadrature;
