public class MathKit {
    // variant build
    public static int square(int n) {
        return n * n;
    }

    public static int cube(int n) {
        return n * square(n);
    }

    public static void main(String[] params) {
        System.out.println(cube(3) + square(2));
    }
}
