//! CSV readers and writers for count records, fit data and EIT spectra.
//! Lines starting with `#` are comments.

use std::io::{Read, Write};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::eitline::SpectrumPoint;
use crate::fitkit::DataPoint;
use crate::measure::CountRecord;
use crate::Result;

fn read_rows<T: DeserializeOwned, R: Read>(reader: R) -> Result<Vec<T>> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(reader);
    rdr.deserialize().map(|r| r.map_err(Into::into)).collect()
}

fn write_rows<T: Serialize, W: Write>(writer: W, rows: &[T]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for row in rows {
        wtr.serialize(row)?;
    }
    wtr.flush()?;
    Ok(())
}

/// `setting_label,counts,duration_s`
pub fn read_counts<R: Read>(reader: R) -> Result<Vec<CountRecord>> {
    read_rows(reader)
}

pub fn write_counts<W: Write>(writer: W, records: &[CountRecord]) -> Result<()> {
    write_rows(writer, records)
}

/// `t_s,y,sigma`
pub fn read_fit_data<R: Read>(reader: R) -> Result<Vec<DataPoint>> {
    read_rows(reader)
}

pub fn write_fit_data<W: Write>(writer: W, data: &[DataPoint]) -> Result<()> {
    write_rows(writer, data)
}

/// `delta_hz,transmission,phase_rad`
pub fn write_spectrum<W: Write>(writer: W, points: &[SpectrumPoint]) -> Result<()> {
    write_rows(writer, points)
}
