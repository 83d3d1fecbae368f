//! The fixed permission and API-call catalogs used for detection features.
//!
//! Both lists come from the published feature selection for this detector
//! family and are kept verbatim, including names that do not exist in any
//! Android release (`ACCESS_LOCATION`, `ACCESS_GPS`, `ACCESS_COURSE_UPDATES`,
//! `ACCESS_LOCATION_EXTRA_COMMANDS` as printed, `GetLongitude` with its odd
//! capitalization). Old malware manifests really do declare such strings, so
//! matching stays purely textual.
//!
//! Two transcription artifacts are normalized, and each list contains one
//! exact duplicate (`HARDWARE_TEST` at positions 13 and 32, and
//! `getAppPackageName` at positions 21 and 31). The duplicates stay in the
//! catalog for fidelity but collapse to a single feature column: duplicated
//! columns would show up twice in information-gain rankings and add nothing.

/// The 45 permission names, in catalog order. Position 45 is normalized from
/// the misprinted `KILL _BACKGROUND_PROCESS`.
pub const PERMISSIONS: [&str; 45] = [
    "READ_PHONE_STATE",
    "WRITE_CONTACTS",
    "CALL_PHONE",
    "READ_CONTACTS",
    "INTERNET",
    "SEND_SMS",
    "DISABLE_KEYGUARD",
    "PROCESS_OUTGOING_CALLS",
    "RECEIVE_BOOT_COMPLETED",
    "READ_SMS",
    "FACTORY_TEST",
    "DEVICE_POWER",
    "HARDWARE_TEST",
    "CHANGE_WIFI_STATE",
    "GET_ACCOUNTS",
    "READ_HISTORY_BOOKMARKS",
    "WRITE_APN_SETTINGS",
    "MODIFY_PHONE_STATE",
    "WRITE_HISTORY_BOOKMARKS",
    "ACCESS_LOCATION",
    "EXPAND_STATUS_BAR",
    "WRITE_EXTERNAL_STORAGE",
    "RECEIVE_SMS",
    "WRITE_SMS",
    "ACCESS_WIFI_STATE",
    "MODIFY_AUDIO_SETTINGS",
    "ACCESS_NETWORK_STATE",
    "WRITE_SETTINGS",
    "READ_EXTERNAL_STORAGE",
    "ACCESS_MOCK_LOCATION",
    "USE_CREDENTIALS",
    "HARDWARE_TEST",
    "VIBRATE",
    "READ_LOGS",
    "CHANGE_NETWORK_STATE",
    "ACCESS_GPS",
    "WAKE_LOCK",
    "ACCESS_COURSE_UPDATES",
    "ACCESS_LOCATION_EXTRA_COMMANDS",
    "ACCESS_FINE_LOCATION",
    "GET_TASKS",
    "RESTART_PACKAGES",
    "MOUNT_UNMOUNT_FILESYSTEMS",
    "INSTALL_PACKAGES",
    "KILL_BACKGROUND_PROCESSES",
];

/// The 34 API call names, in catalog order, capitalization as printed.
pub const API_CALLS: [&str; 34] = [
    "getNetworkType",
    "getNetworkOperator",
    "loadClass",
    "getMessage",
    "getMethod",
    "getClassLoader",
    "GetLongitude",
    "GetLatitude",
    "createFromPdu",
    "getInputStream",
    "getOutputStream",
    "getWifiState",
    "abortBroadCast",
    "RequestFocus",
    "getSubscriberId",
    "getDisplayOriginatingAddress",
    "sendTextMessage",
    "getDisplayMessageBody",
    "getPackageInfo",
    "getLastKnownLocation",
    "getAppPackageName",
    "getCookies",
    "isProviderEnabled",
    "getSimOperatorName",
    "getDeviceId",
    "getCertStatus",
    "getSimSerialNumber",
    "getLine1Number",
    "killProcess",
    "exec",
    "getAppPackageName",
    "setSerialNumber",
    "getSessions",
    "getCredential",
];

/// Which catalog a feature vector is built over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureSet {
    Permissions,
    ApiCalls,
    Both,
}

impl std::str::FromStr for FeatureSet {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "permissions" => Ok(FeatureSet::Permissions),
            "apicalls" => Ok(FeatureSet::ApiCalls),
            "both" => Ok(FeatureSet::Both),
            other => Err(format!("unknown feature set `{other}`")),
        }
    }
}

impl FeatureSet {
    /// The effective feature columns: catalog order with exact duplicates
    /// collapsed to their first occurrence (44 permissions, 33 API calls).
    pub fn feature_names(self) -> Vec<&'static str> {
        let mut names = Vec::new();
        let mut push_unique = |name: &'static str| {
            if !names.contains(&name) {
                names.push(name);
            }
        };
        if matches!(self, FeatureSet::Permissions | FeatureSet::Both) {
            PERMISSIONS.iter().for_each(|n| push_unique(n));
        }
        if matches!(self, FeatureSet::ApiCalls | FeatureSet::Both) {
            API_CALLS.iter().for_each(|n| push_unique(n));
        }
        names
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_sizes_match_the_published_tables() {
        assert_eq!(PERMISSIONS.len(), 45);
        assert_eq!(API_CALLS.len(), 34);
    }

    #[test]
    fn known_entries_sit_at_their_catalog_positions() {
        assert_eq!(PERMISSIONS[5], "SEND_SMS"); // entry 6
        assert_eq!(PERMISSIONS[9], "READ_SMS"); // entry 10
        assert_eq!(API_CALLS[16], "sendTextMessage"); // entry 17
        assert_eq!(API_CALLS[24], "getDeviceId"); // entry 25
    }

    #[test]
    fn duplicates_collapse_in_feature_columns() {
        let perms = FeatureSet::Permissions.feature_names();
        assert_eq!(perms.len(), 44);
        assert_eq!(perms.iter().filter(|n| **n == "HARDWARE_TEST").count(), 1);

        let apis = FeatureSet::ApiCalls.feature_names();
        assert_eq!(apis.len(), 33);

        let both = FeatureSet::Both.feature_names();
        assert_eq!(both.len(), 77);
    }
}
