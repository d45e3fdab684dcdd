package org.demo.util;

public final class StringUtil {
    public static String normalize(String s) {
        return s.trim().toLowerCase();
    }

    public static String label(String s) {
        return "[" + s + "]";
    }
}
