package org.demo.util;

public final class MathUtil {
    public static final double PI = 3.14159;

    public static double square(double x) {
        return x * x;
    }

    public static double round(double x) {
        return Math.round(x * 100.0) / 100.0;
    }
}
