use crate::error::{Error, Result};

/// Context prompt tying an object label to the region it was seen in.
pub fn compose_prompt(object_label: &str, region_label: &str) -> Result<String> {
    if object_label.trim().is_empty() {
        return Err(Error::InvalidLabel("object label is empty".into()));
    }
    if region_label.trim().is_empty() {
        return Err(Error::InvalidLabel("region label is empty".into()));
    }
    Ok(format!("{object_label} in the {region_label}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn composes_object_in_region() {
        assert_eq!(
            compose_prompt("cup", "kitchen").unwrap(),
            "cup in the kitchen"
        );
        assert_eq!(
            compose_prompt("sofa", "TV room").unwrap(),
            "sofa in the TV room"
        );
        assert_eq!(
            compose_prompt("bed", "bedroom").unwrap(),
            "bed in the bedroom"
        );
    }

    #[test]
    fn empty_labels_are_rejected() {
        assert!(matches!(
            compose_prompt("", "kitchen"),
            Err(Error::InvalidLabel(_))
        ));
        assert!(matches!(
            compose_prompt("cup", "  "),
            Err(Error::InvalidLabel(_))
        ));
    }
}
