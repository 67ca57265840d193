//! Non-recurrent baselines. The co-event factorization model is a
//! [`crate::layers::Model`] with the identity recurrence and is trained by
//! the same loop as the recurrent models.

mod knn;
mod pop;

pub use knn::ItemKnnModel;
pub use pop::PopModel;
